//! The file-based workflow on your own data: write a heteroscedastic CSV,
//! load it, fit a noise-nonstationary model, and save predictions.
//!
//! Run with: `cargo run --release --example custom_csv`

use nalgebra::DVector;
use nsgp::harness::{load_csv, split, FittedModel};
use nsgp::infer_map::{fit_map, MapOptions};
use nsgp::model::{Config, VariantFlags};

fn main() -> nsgp::Result<()> {
    // motorcycle-style data: quiet, then a violent oscillation with
    // growing noise
    let dir = std::env::temp_dir();
    let csv_path = dir.join("nsgp_example_data.csv");
    let mut csv = String::from("x,y\n");
    for i in 0..120 {
        let t = i as f64 / 119.0 * 60.0;
        let signal = if t < 15.0 {
            0.0
        } else {
            -60.0 * ((t - 15.0) / 8.0).sin() * (-(t - 15.0) / 25.0).exp()
        };
        let noise_sd = if t < 15.0 { 1.0 } else { 12.0 };
        // deterministic pseudo-noise keeps the example reproducible
        let wobble = ((i * 2654435761u64 as usize) % 1000) as f64 / 1000.0 - 0.5;
        csv.push_str(&format!("{t},{}\n", signal + noise_sd * 2.0 * wobble));
    }
    std::fs::write(&csv_path, csv).expect("write example data");

    let dataset = split(&load_csv(&csv_path)?, 0.5, 1)?;
    let (x, y) = dataset.train_xy();

    let config = Config::default();
    let flags = VariantFlags::from_name("omega")?;
    let opts = MapOptions { restarts: 4, max_iters: 1500, grad_tol: 1e-5, seed: 1 };
    let fit = fit_map(&y, &x, &config.theta, &flags, &opts)?;
    println!("fitted {} training points, MLL {:.3}", x.len(), fit.mll.total);

    let model = FittedModel::from_map(&fit, config.theta, flags, dataset.norm, x, y);
    let model_path = dir.join("nsgp_example_model.txt");
    model.save(&model_path)?;

    let targets = DVector::from_fn(13, |i, _| i as f64 * 5.0);
    let predictions = model.predict_csv(&targets, 1, 0)?;
    print!("{predictions}");
    Ok(())
}
