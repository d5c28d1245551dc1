//! Score documents against a topic model and build the split that measures
//! transfer to one topic: on-topic train/validation/test, off-topic
//! train/validation, balanced per genre.
//!
//! ```text
//! cargo run --release --example transfer_split -- [topic]
//! ```

use topicshift::experiment::{prepare, ExperimentConfig};
use topicshift::splits::{build_transfer_split, emit_split, TransferSplit, PARTITIONS};

fn main() -> topicshift::Result<()> {
    let topic: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::default();
    let prepared = prepare(&config)?;
    println!("topic {topic}: {}", prepared.model.top_words(topic, 8)?.join(" "));

    let split = build_transfer_split(&prepared.corpus, &prepared.scores, &config.split_spec(topic, 30))?;
    for name in PARTITIONS {
        let part = split.partition(name).expect("known partition");
        let sizes: Vec<String> = part.iter().map(|(g, ids)| format!("{g}:{}", ids.len())).collect();
        println!("{name:<10} {}", sizes.join(" "));
    }
    // the on-topic test documents are the ones scoring highest on the topic
    let theta = |id: &String| prepared.scores.scores[id].theta[topic];
    let mean = |ids: Vec<&String>| ids.iter().map(|id| theta(id)).sum::<f64>() / ids.len() as f64;
    println!("mean θ[{topic}]: on_test {:.3}, off_train {:.3}", mean(TransferSplit::ids(&split.on_test).collect()), mean(TransferSplit::ids(&split.off_train).collect()));

    let dir = tempfile::tempdir().expect("temporary directory");
    let manifest = emit_split(&split, &prepared.corpus, dir.path())?;
    println!("wrote {:?} to {}", manifest.files.values().collect::<Vec<_>>(), dir.path().display());
    Ok(())
}
