//! Fit a lengthscale-nonstationary GP to synthetic data by MAP and score
//! it on the held-out half.
//!
//! Run with: `cargo run --release --example fit_map`

use nsgp::harness::{generate_dataset, mse, nlpd, split, DatasetName};
use nsgp::infer_map::{fit_map, MapOptions};
use nsgp::model::{Hyperparams, Latent, VariantFlags};
use nsgp::predict::{mixture_moments, predict_map};

fn main() -> nsgp::Result<()> {
    let dataset = generate_dataset(DatasetName::DEll, 100, 7)?;
    let dataset = split(&dataset, 0.5, 7)?;
    let (x_train, y_train) = dataset.train_xy();
    let (x_test, y_test) = dataset.test_xy();

    let theta = Hyperparams::defaults();
    let flags = VariantFlags::from_name("ell")?;
    let opts = MapOptions { restarts: 6, max_iters: 2000, grad_tol: 1e-5, seed: 7 };

    let fit = fit_map(&y_train, &x_train, &theta, &flags, &opts)?;
    println!(
        "MAP fit on {} training points: MLL {:.3}, converged: {}, iterations: {}",
        x_train.len(),
        fit.mll.total,
        fit.converged,
        fit.iterations
    );
    if let Latent::Field(ell) = &fit.state.ell {
        let nat: Vec<f64> = ell.iter().map(|v| v.exp()).collect();
        let min = nat.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = nat.iter().cloned().fold(0.0f64, f64::max);
        println!("fitted lengthscale varies from {min:.3} to {max:.3}");
    }

    let mixture = predict_map(&fit, &y_train, &x_train, &x_test, &theta, 1, 0)?;
    let (mean, _) = mixture_moments(&mixture);
    println!(
        "test MSE {:.4}, test NLPD {:.4}",
        mse(&y_test, &mean)?,
        nlpd(&y_test, &mixture)?
    );
    Ok(())
}
