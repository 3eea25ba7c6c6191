//! Latent reconstruction against known generating functions: RMSE of the
//! fitted log-latents at the training inputs, and the error curve over a
//! grid of nested training sizes.

use nalgebra::DVector;
use rayon::prelude::*;

use super::Dataset;
use crate::error::{NsgpError, Result};
use crate::infer_map::{fit_map, MapOptions, MapResult};
use crate::model::{Hyperparams, LatentState, VariantFlags};

/// Per-component log-scale RMSE of a fit against the recorded truth.
#[derive(Debug, Clone, Copy)]
pub struct LatentRmse {
    pub ell: f64,
    pub sigma: f64,
    pub omega: f64,
}

/// One point of the reconstruction curve.
#[derive(Debug, Clone, Copy)]
pub struct ReconstructionPoint {
    pub size: usize,
    pub rmse: LatentRmse,
    pub mll: f64,
}

/// RMSE between fitted and true log-latents at the given training indices.
pub fn latent_rmse(state: &LatentState, dataset: &Dataset, idx: &[usize]) -> Result<LatentRmse> {
    let truth = dataset
        .truth
        .as_ref()
        .ok_or(NsgpError::Empty("latent_rmse: dataset has no recorded truth"))?;
    let n = idx.len();
    if n == 0 {
        return Err(NsgpError::Empty("latent_rmse: no indices"));
    }
    let rmse = |fitted: &DVector<f64>, true_nat: &DVector<f64>| {
        let sum: f64 = (0..n)
            .map(|i| {
                let d = fitted[i] - true_nat[idx[i]].ln();
                d * d
            })
            .sum();
        (sum / n as f64).sqrt()
    };
    Ok(LatentRmse {
        ell: rmse(&state.ell.log_values(n), &truth.ell),
        sigma: rmse(&state.sigma.log_values(n), &truth.sigma),
        omega: rmse(&state.omega.log_values(n), &truth.omega),
    })
}

/// Convenience: RMSE of a MAP fit made on the dataset's training split.
pub fn map_latent_rmse(fit: &MapResult, dataset: &Dataset) -> Result<LatentRmse> {
    latent_rmse(&fit.state, dataset, &dataset.train_idx)
}

/// Fit at a grid of nested training sizes and report the reconstruction
/// error per size. The subsets are prefixes of one seeded permutation, so
/// each size contains the previous one.
pub fn reconstruction_curve(
    dataset: &Dataset,
    theta: &Hyperparams,
    flags: &VariantFlags,
    sizes: &[usize],
    opts: &MapOptions,
) -> Result<Vec<ReconstructionPoint>> {
    if dataset.truth.is_none() {
        return Err(NsgpError::Empty("reconstruction_curve: dataset has no recorded truth"));
    }
    let order = {
        use rand::prelude::*;
        let mut order: Vec<usize> = (0..dataset.n()).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
        order.shuffle(&mut rng);
        order
    };
    let points: Vec<Result<ReconstructionPoint>> = sizes
        .par_iter()
        .map(|&size| {
            if size < 2 || size > dataset.n() {
                return Err(NsgpError::Domain(format!(
                    "reconstruction size {size} outside [2, {}]",
                    dataset.n()
                )));
            }
            let mut idx: Vec<usize> = order[..size].to_vec();
            idx.sort_unstable();
            let x = DVector::from_fn(size, |i, _| dataset.x_norm[idx[i]]);
            let y = DVector::from_fn(size, |i, _| dataset.y_norm[idx[i]]);
            let fit = fit_map(&y, &x, theta, flags, opts)?;
            let rmse = latent_rmse(&fit.state, dataset, &idx)?;
            Ok(ReconstructionPoint { size, rmse, mll: fit.mll.total })
        })
        .collect();
    points.into_iter().collect()
}

/// Tab-separated serialization of a reconstruction curve.
pub fn curve_to_tsv(points: &[ReconstructionPoint]) -> String {
    let mut out = String::from("size\trmse_log_ell\trmse_log_sigma\trmse_log_omega\tmll\n");
    for p in points {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.size, p.rmse.ell, p.rmse.sigma, p.rmse.omega, p.mll
        ));
    }
    out
}
