//! Run the desk-scale benchmark: three datasets with different kinds of
//! nonstationarity, each fit with all seven model variants by MAP.
//!
//! Run with: `cargo run --release --example variant_benchmark`

use nsgp::harness::{run_experiment, suite_datasets, InferenceMethod};
use nsgp::model::{Config, VariantFlags};

fn main() -> nsgp::Result<()> {
    let config = Config {
        seed: 11,
        map_restarts: 4,
        map_max_iters: 1000,
        ..Default::default()
    };
    let datasets = suite_datasets("desk", config.seed)?;
    let variants = VariantFlags::benchmark_variants();
    let report = run_experiment(&datasets, &variants, InferenceMethod::Map, &config);
    print!("{}", report.to_tsv());

    let total: f64 = report.cells.iter().map(|c| c.runtime_s).sum();
    eprintln!("total fit time {total:.1}s");
    Ok(())
}
