//! Fit collapsed-Gibbs LDA on a planted corpus, compare the learned topics
//! with the planted ones, and choose K by coherence × diversity.
//!
//! ```text
//! cargo run --release --example topic_model
//! ```

use topicshift::corpus::build_vocabulary;
use topicshift::synthkit::{majority_jaccard, make_biased_corpus, PlantedSpec};
use topicshift::topics::{select_topic_count, topic_coherence, topic_diversity, train_lda, LdaConfig, SelectionConfig};

fn main() -> topicshift::Result<()> {
    let spec = PlantedSpec { bias: 0.5, ..PlantedSpec::default() };
    let (corpus, truth) = make_biased_corpus(&spec)?;
    // the function words are the most frequent ones; keep them out of topics
    let vocab = build_vocabulary(&corpus, 2, 44)?;
    let lda = LdaConfig { k: spec.topics, sweeps: 200, ..LdaConfig::default() };
    let model = train_lda(&corpus, &vocab, &lda)?;

    let learned: Vec<Vec<&str>> = (0..model.k()).map(|t| model.top_words(t, 10)).collect::<Result<_, _>>()?;
    let planted: Vec<Vec<&str>> = (0..spec.topics).map(|t| truth.top_topic_words(t, 10)).collect();
    for (t, words) in learned.iter().enumerate() {
        println!("topic {t}: {}", words.join(" "));
    }
    let jaccard = majority_jaccard(&learned, &planted);
    println!("best-match Jaccard with planted topics: {jaccard:.2?}");
    println!("coherence {:.4}, diversity {:.4}", topic_coherence(&model, &corpus, 10)?, topic_diversity(&model, 25));

    let selection = SelectionConfig { lda: LdaConfig { sweeps: 100, ..lda }, ..SelectionConfig::default() };
    let (chosen, _) = select_topic_count(&corpus, &vocab, &[3, 6, 9], &selection)?;
    for c in &chosen.scores {
        println!("K={} coherence {:.4} diversity {:.4} product {:.4}", c.k, c.coherence, c.diversity, c.product);
    }
    println!("chosen K={}", chosen.chosen);
    Ok(())
}
