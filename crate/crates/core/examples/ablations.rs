//! Keyword-count and mixing ablations on the default planted corpus.
//!
//! ```text
//! cargo run --release --example ablations -- [seeds] [config.toml]
//! ```

use topicshift::evaluate::{keyword_sweep, mix_sweep, Cell, Condition, MixRow};
use topicshift::experiment::{prepare, ExperimentConfig};
use topicshift::keywords::KeywordLimit;

fn main() -> topicshift::Result<()> {
    let seeds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let base = match std::env::args().nth(2) {
        Some(p) => ExperimentConfig::load(p.as_ref())?,
        None => ExperimentConfig::default(),
    };
    let config = ExperimentConfig {
        seeds,
        conditions: vec![Condition::AugAdapt],
        ..base
    };
    let prepared = prepare(&config)?;
    let grid = prepared.grid(config.jobs)?;
    let cells: Vec<Cell> = grid.iter().map(|c| c.cell(&prepared)).collect();
    let settings = prepared.settings()?;
    let run_seeds = config.run_seeds();

    let limits = [KeywordLimit::Top(1), KeywordLimit::Top(5), KeywordLimit::Top(10), KeywordLimit::Top(20), KeywordLimit::All];
    println!("keywords per source");
    for p in keyword_sweep(&cells, &limits, &config.generator(), &settings, &run_seeds, config.jobs)? {
        println!("  m={:<4} F1 {:.1}", p.label, 100.0 * p.mean_f1);
    }

    let n = config.split.n_train[0];
    let rows = [
        MixRow { n_original: n, n_synthetic: 0, condition: Condition::AugAdapt },
        MixRow { n_original: n, n_synthetic: n, condition: Condition::AugAdapt },
        MixRow { n_original: n, n_synthetic: n, condition: Condition::AugBaseline },
        MixRow { n_original: n, n_synthetic: 3 * n, condition: Condition::AugAdapt },
        MixRow { n_original: 0, n_synthetic: n, condition: Condition::AugAdapt },
    ];
    println!("originals + synthetic per genre");
    for p in mix_sweep(&cells, &rows, &settings, &run_seeds, config.jobs)? {
        println!("  {:<24} F1 {:.1}", p.label, 100.0 * p.mean_f1);
    }
    Ok(())
}
