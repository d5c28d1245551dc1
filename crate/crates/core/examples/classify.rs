//! Train the bag-of-words genre classifier with validation-based early
//! stopping and score it on random 1000-character windows of on-topic test
//! documents: once trained on-topic, once off-topic.
//!
//! ```text
//! cargo run --release --example classify -- [topic]
//! ```

use topicshift::classify::{predict_windows, train_classifier, ClassifierConfig, LabeledText};
use topicshift::corpus::Document;
use topicshift::evaluate::macro_f1;
use topicshift::experiment::{prepare, ExperimentConfig};
use topicshift::splits::{Partition, TransferSplit};

fn labeled<'a>(docs: &[&'a Document]) -> Vec<LabeledText<'a>> {
    docs.iter().map(|d| LabeledText { text: &d.norm_text, genre: &d.genre }).collect()
}

fn main() -> topicshift::Result<()> {
    let topic: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig::default();
    let prepared = prepare(&config)?;
    let split = prepared.cell_data(topic, 30)?.split;
    let docs = |p: &Partition| prepared.corpus.select(TransferSplit::ids(p));

    let test = docs(&split.on_test)?;
    let texts: Vec<&str> = test.iter().map(|d| d.norm_text.as_str()).collect();
    let gold: Vec<&str> = test.iter().map(|d| d.genre.as_str()).collect();
    let genres: Vec<String> = split.genres().cloned().collect();

    for (name, train, val) in [("on-topic", &split.on_train, &split.on_val), ("off-topic", &split.off_train, &split.off_val)] {
        let (train, val) = (docs(train)?, docs(val)?);
        let model = train_classifier(&labeled(&train), &labeled(&val), &prepared.features, &ClassifierConfig::default())?;
        let predicted = predict_windows(&model, &texts, 1);
        let f1 = macro_f1(&predicted, &gold, &genres)?;
        let best = &model.history[model.best_epoch - 1];
        println!(
            "{name:<9} training: kept epoch {:>3} (validation F1 {:.3}), on-topic test macro-F1 {:.3}",
            model.best_epoch, best.val_macro_f1, f1
        );
    }
    Ok(())
}
