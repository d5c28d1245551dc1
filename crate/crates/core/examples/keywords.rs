//! Topic-weighted keyword extraction: score every word of a document by its
//! count times Σ_t θ_t · L(w, t), keep the top-m distinct words and emit their
//! occurrences in document order.
//!
//! ```text
//! cargo run --release --example keywords -- [m]
//! ```

use topicshift::experiment::{prepare, ExperimentConfig};
use topicshift::keywords::{extract_keywords, score_word, KeywordLimit};

fn main() -> topicshift::Result<()> {
    let m: KeywordLimit = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(KeywordLimit::Top(10));
    let prepared = prepare(&ExperimentConfig::default())?;
    let doc = &prepared.corpus.documents()[0];
    let theta = &prepared.scores.scores[&doc.id];
    println!("{} ({}), dominant topic {}", doc.id, doc.genre, theta.dominant());

    let mut scored: Vec<(&str, f64)> = prepared
        .model
        .vocabulary()
        .words()
        .iter()
        .map(|w| (w.as_str(), score_word(w, doc, theta, &prepared.model)))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (w, s) in scored.iter().take(5) {
        println!("  {w:<8} {s:.5}");
    }

    let ks = extract_keywords(doc, &prepared.model, theta, m)?;
    println!("m={m}: {} tokens over {} distinct words", ks.tokens.len(), ks.distinct_count);
    println!("  {}", ks.tokens.join(" "));
    Ok(())
}
