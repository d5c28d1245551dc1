//! Keyword-conditioned generation: train one generator per genre on that
//! genre's off-topic training documents, then write new documents from the
//! keywords of target-topic documents (adapt) or off-topic ones (baseline).
//!
//! ```text
//! cargo run --release --example augment -- [topic]
//! ```

use topicshift::augment::{generate, AugMode};
use topicshift::corpus::Document;
use topicshift::evaluate::RunSettings;
use topicshift::experiment::{prepare, ExperimentConfig};
use topicshift::topics::infer_doc_topics;

fn main() -> topicshift::Result<()> {
    let topic: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::default();
    let prepared = prepare(&config)?;
    let data = prepared.cell_data(topic, 30)?;
    let cell = data.cell(&prepared);
    println!("target topic {topic}: {}", prepared.model.top_words(topic, 8)?.join(" "));

    let settings = RunSettings::default();
    for mode in [AugMode::Adapt, AugMode::Baseline] {
        let (plan, docs) = cell.synthetic(mode, &settings, 20, 7)?;
        let on_target = docs
            .iter()
            .filter(|d| infer_doc_topics(&prepared.model, &Document::new(d.id.clone(), d.genre.clone(), d.text.clone()), 50, d.seed).map(|t| t.dominant() == topic).unwrap_or(false))
            .count();
        println!("{mode:?}: {} documents from {} keyword sources, {on_target} dominated by topic {topic}", docs.len(), plan.keyword_pool.len());
        let d = &docs[0];
        let preview: String = d.text.split(' ').take(30).collect::<Vec<_>>().join(" ");
        println!("  [{}] keywords: {}", d.genre, d.keywords.tokens.join(" "));
        println!("  [{}] {preview} ...", d.genre);
    }

    // the same keywords rendered by two genres' generators
    let (_, adapt) = cell.synthetic(AugMode::Adapt, &settings, 1, 7)?;
    let keywords = &adapt[0].keywords;
    for (genre, handle) in cell.generators.iter().take(2) {
        let d = generate(handle, keywords, 25, 11)?;
        println!("{genre}: {}", d.text);
    }
    Ok(())
}
