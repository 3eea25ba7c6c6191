//! Fit a fully nonstationary model, save it, and produce the prediction
//! CSV (mean, variance, 95% band, and latent posterior means) on a grid.
//!
//! Run with: `cargo run --release --example predict_targets`

use nalgebra::DVector;
use nsgp::harness::{generate_dataset, DatasetName, FittedModel};
use nsgp::infer_map::{fit_map, MapOptions};
use nsgp::model::{Hyperparams, VariantFlags};

fn main() -> nsgp::Result<()> {
    let dataset = generate_dataset(DatasetName::DOmegaSigma, 60, 5)?;
    let (x, y) = dataset.train_xy();
    let theta = Hyperparams::defaults();
    let flags = VariantFlags::from_name("omega-sigma")?;
    let opts = MapOptions { restarts: 4, max_iters: 1500, grad_tol: 1e-5, seed: 5 };
    let fit = fit_map(&y, &x, &theta, &flags, &opts)?;

    let model = FittedModel::from_map(&fit, theta, flags, dataset.norm, x, y);
    let targets = DVector::from_fn(21, |i, _| i as f64 / 20.0);
    let csv = model.predict_csv(&targets, 1, 0)?;
    print!("{csv}");
    Ok(())
}
