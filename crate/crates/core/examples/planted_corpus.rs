//! Planted corpora: a genre × topic corpus with a tunable topic↔genre bias,
//! and the disjoint two-topic corpus used to check topic recovery.
//!
//! ```text
//! cargo run --release --example planted_corpus -- [bias]
//! ```

use topicshift::synthkit::{make_biased_corpus, two_topic_corpus, PlantedSpec, TwoTopicSpec};

fn main() -> topicshift::Result<()> {
    let bias: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let spec = PlantedSpec { bias, ..PlantedSpec::default() };
    let (corpus, truth) = make_biased_corpus(&spec)?;
    println!("{} documents, bias {bias}", corpus.len());

    let genres: Vec<String> = corpus.genres().iter().cloned().collect();
    println!("primary topic counts per genre:");
    for (g, row) in genres.iter().zip(truth.contingency(&genres, spec.topics)) {
        println!("  {g:<4} {row:?}");
    }
    for (g, words) in &truth.marker_words {
        println!("  {g} markers: {}", words.join(" "));
    }
    for t in 0..spec.topics {
        println!("topic {t}: {}", truth.top_topic_words(t, 8).join(" "));
    }
    let doc = &corpus.documents()[0];
    let preview: String = doc.norm_text.split(' ').take(24).collect::<Vec<_>>().join(" ");
    println!("{} ({}): {preview} ...", doc.id, doc.genre);

    let (two, planted) = two_topic_corpus(&TwoTopicSpec::default());
    println!("two-topic corpus: {} documents over {:?} / {:?} ...", two.len(), &planted[0][..3], &planted[1][..3]);
    Ok(())
}
