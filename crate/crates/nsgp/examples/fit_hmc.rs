//! Sample the latent posterior with NUTS and compare the posterior
//! predictive against the MAP solution.
//!
//! Run with: `cargo run --release --example fit_hmc`

use nsgp::harness::{generate_dataset, nlpd, split, DatasetName};
use nsgp::infer_hmc::{sample_posterior, NutsConfig};
use nsgp::infer_map::{fit_map, MapOptions};
use nsgp::model::{Hyperparams, VariantFlags};
use nsgp::predict::{predict_hmc, predict_map};

fn main() -> nsgp::Result<()> {
    let dataset = split(&generate_dataset(DatasetName::DEll, 48, 3)?, 0.5, 3)?;
    let (x_train, y_train) = dataset.train_xy();
    let (x_test, y_test) = dataset.test_xy();
    let theta = Hyperparams::defaults();
    let flags = VariantFlags::from_name("ell")?;

    let map_opts = MapOptions { restarts: 6, max_iters: 2000, grad_tol: 1e-5, seed: 3 };
    let map = fit_map(&y_train, &x_train, &theta, &flags, &map_opts)?;

    let cfg = NutsConfig {
        n_samples: 400,
        n_warmup: Some(100),
        n_chains: 4,
        seed: 3,
        start_at: Some(map.state.clone()),
        ..Default::default()
    };
    let samples = sample_posterior(&y_train, &x_train, &theta, &flags, &cfg)?;
    for stats in &samples.chain_stats {
        println!(
            "chain {}: {} transitions, {} divergences, mean tree depth {:.2}",
            stats.chain, stats.transitions, stats.divergences, stats.mean_tree_depth
        );
    }

    let thinned = samples.thin(10);
    let hmc_mix = predict_hmc(&thinned, &y_train, &x_train, &x_test, &theta, 1, 0)?;
    let map_mix = predict_map(&map, &y_train, &x_train, &x_test, &theta, 1, 0)?;
    println!(
        "NLPD: MAP {:.4}, HMC mixture over {} draws {:.4}",
        nlpd(&y_test, &map_mix)?,
        thinned.len(),
        nlpd(&y_test, &hmc_mix)?
    );
    Ok(())
}
