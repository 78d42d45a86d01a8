//! Runs the FOL-versus-fuzzy sweep on the bundled synthetic corpus.
//!
//! cargo run --release -p fuzzy-mln --example wsd_sweep -- [seed] [max-iterations]

use std::time::Instant;

use fuzzy_mln::eval::{
    default_generator_config, default_taxonomy, generate_corpus, run_experiment, ExperimentConfig,
    DEFAULT_TEMPLATE,
};
use fuzzy_mln::Mln;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let taxonomy = default_taxonomy();
    let corpus = generate_corpus(&taxonomy, &default_generator_config(), seed).expect("corpus");
    let template = Mln::parse_str(DEFAULT_TEMPLATE).expect("template");
    let mut cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    if let Some(n) = std::env::args().nth(2).and_then(|s| s.parse().ok()) {
        cfg.train.max_iterations = n;
    }
    let start = Instant::now();
    let result = run_experiment(&corpus, &taxonomy, &template, &cfg).expect("experiment");
    print!("{}", result.to_tsv());
    eprintln!("{} folds in {:.1?}", result.folds.len(), start.elapsed());
}
