//! Recover the generating lengthscale, signal, and noise functions from
//! data with known truth, at increasing training sizes.
//!
//! Run with: `cargo run --release --example latent_reconstruction`

use nsgp::harness::{curve_to_tsv, generate_dataset, reconstruction_curve, DatasetName};
use nsgp::infer_map::MapOptions;
use nsgp::model::{Hyperparams, VariantFlags};

fn main() -> nsgp::Result<()> {
    let dataset = generate_dataset(DatasetName::DOmegaSigmaEll, 120, 8)?;
    let theta = Hyperparams::defaults();
    let flags = VariantFlags::fully_nonstationary();
    let opts = MapOptions { restarts: 4, max_iters: 2000, grad_tol: 1e-5, seed: 8 };
    let curve = reconstruction_curve(&dataset, &theta, &flags, &[30, 60, 120], &opts)?;
    print!("{}", curve_to_tsv(&curve));
    Ok(())
}
