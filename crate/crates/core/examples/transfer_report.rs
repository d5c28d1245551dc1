//! The full experiment: every topic, the four main conditions, five seeds,
//! macro-F1 table and paired t-tests. Writes report.csv, report.json,
//! table.txt and manifest.json.
//!
//! ```text
//! cargo run --release --example transfer_report -- [out-dir] [jobs]
//! ```

use topicshift::evaluate::Condition;
use topicshift::experiment::{run_experiment, ExperimentConfig};

fn main() -> topicshift::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = ExperimentConfig {
        out: args.next().unwrap_or_else(|| "runs/transfer_report".into()).into(),
        jobs: args.next().and_then(|s| s.parse().ok()).unwrap_or(1),
        conditions: Condition::ALL.to_vec(),
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&config, None)?;
    println!("{}", report.table());
    for c in &report.comparisons {
        println!("{} vs {}: {:+.2} points, p = {:.4}", c.a, c.b, 100.0 * c.test.mean_difference, c.test.p);
    }
    println!("artifacts in {}", config.out.display());
    Ok(())
}
