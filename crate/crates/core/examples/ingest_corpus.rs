//! Ingest a line-delimited JSON corpus: normalization, genre inventory and
//! the two vocabularies (topic words with a frequency stoplist, classifier
//! features without one).
//!
//! ```text
//! cargo run --example ingest_corpus -- [corpus.jsonl]
//! ```

use std::io::Write;

use topicshift::corpus::{build_vocabulary, ingest, normalize};

const SAMPLE: &[(&str, &str, &str)] = &[
    ("r1", "review", "I loved this album! 10/10, the guitar on track 3 is great."),
    ("r2", "review", "Terrible phone: the battery died after 2 days. Don't buy it."),
    ("n1", "news", "The council voted 7-2 on Tuesday to expand the city's bus network."),
    ("n2", "news", "Shares of the phone maker fell 4% after the battery recall."),
    ("i1", "instruction", "Remove the battery, then press the reset button for 10 seconds."),
    ("i2", "instruction", "Tune the guitar, then play the chord progression slowly."),
];

fn main() -> topicshift::Result<()> {
    let dir = tempfile::tempdir().expect("temporary directory");
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let path = dir.path().join("corpus.jsonl");
            let mut f = std::fs::File::create(&path).expect("create sample corpus");
            for (id, genre, text) in SAMPLE {
                writeln!(f, "{}", serde_json::json!({"id": id, "genre": genre, "text": text})).expect("write sample corpus");
            }
            path
        }
    };

    println!("{:?}", SAMPLE[0].2);
    println!("  -> {:?}", normalize(SAMPLE[0].2));

    let corpus = ingest(&path)?;
    println!("{} documents in genres {:?}", corpus.len(), corpus.genres());

    let topic_vocab = build_vocabulary(&corpus, 1, 3)?;
    let features = build_vocabulary(&corpus, 1, 0)?;
    println!("stoplist (3 most frequent words): {:?}", topic_vocab.stoplist());
    println!("topic vocabulary {} words, feature vocabulary {} words", topic_vocab.len(), features.len());
    println!("'battery' is feature #{:?}", features.index_of("battery"));
    Ok(())
}
