//! Synthetic dataset generators.
//!
//! Each dataset draws a function from the input-dependent GP prior with
//! chosen latent profiles on [0, 1] and adds heteroscedastic noise. The
//! varying latents are smooth log-sinusoids
//! `c(t) = exp(log c0 + b sin(2 pi t + phase))`, so a varying component
//! spans a max/min ratio of `exp(2b)`; constant components stay at `c0`.
//! The jump dataset is instead a deterministic sinusoid with an abrupt
//! level shift at t = 0.4 and constant low noise, which rewards an
//! input-dependent lengthscale and defeats an input-dependent signal
//! variance.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Dataset, LatentTruth};
use crate::error::{NsgpError, Result};
use crate::kernel::{cholesky_kernel, nonstationary_kernel};

const ELL_BASE: f64 = 0.15;
const SIGMA_BASE: f64 = 0.5;
const OMEGA_BASE: f64 = 0.08;
const ELL_AMP: f64 = 0.8;
const SIGMA_AMP: f64 = 0.9;
const OMEGA_AMP: f64 = 0.9;
const ELL_PHASE: f64 = 0.3;
const SIGMA_PHASE: f64 = 2.0;
const JUMP_AT: f64 = 0.4;
const JUMP_SIZE: f64 = 1.4;
const JUMP_NOISE: f64 = 0.02;
const JUMP_FREQ: f64 = 6.0;

/// The generated dataset family. Sizes follow the benchmark table:
/// 100 / 150 / 100 / 150 / 90 points, and 101 for the jump data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetName {
    DSigma,
    DEll,
    DOmegaSigma,
    DOmegaEll,
    DOmegaSigmaEll,
    Jump,
}

impl DatasetName {
    pub const ALL: [DatasetName; 6] = [
        DatasetName::DSigma,
        DatasetName::DEll,
        DatasetName::DOmegaSigma,
        DatasetName::DOmegaEll,
        DatasetName::DOmegaSigmaEll,
        DatasetName::Jump,
    ];

    pub fn parse(s: &str) -> Result<DatasetName> {
        match s.to_lowercase().as_str() {
            "d-sigma" | "dsigma" => Ok(DatasetName::DSigma),
            "d-ell" | "dell" => Ok(DatasetName::DEll),
            "d-omega-sigma" | "domegasigma" => Ok(DatasetName::DOmegaSigma),
            "d-omega-ell" | "domegaell" => Ok(DatasetName::DOmegaEll),
            "d-omega-sigma-ell" | "domegasigmaell" => Ok(DatasetName::DOmegaSigmaEll),
            "jump" | "j" => Ok(DatasetName::Jump),
            other => Err(NsgpError::UnknownName(format!(
                "dataset '{other}' (expected d-sigma, d-ell, d-omega-sigma, d-omega-ell, \
                 d-omega-sigma-ell, or jump)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetName::DSigma => "d-sigma",
            DatasetName::DEll => "d-ell",
            DatasetName::DOmegaSigma => "d-omega-sigma",
            DatasetName::DOmegaEll => "d-omega-ell",
            DatasetName::DOmegaSigmaEll => "d-omega-sigma-ell",
            DatasetName::Jump => "jump",
        }
    }

    /// Default size per the benchmark table.
    pub fn default_size(&self) -> usize {
        match self {
            DatasetName::DSigma | DatasetName::DOmegaSigma => 100,
            DatasetName::DEll | DatasetName::DOmegaEll => 150,
            DatasetName::DOmegaSigmaEll => 90,
            DatasetName::Jump => 101,
        }
    }

    fn varies(&self) -> (bool, bool, bool) {
        // (ell, sigma, omega)
        match self {
            DatasetName::DSigma => (false, true, false),
            DatasetName::DEll => (true, false, false),
            DatasetName::DOmegaSigma => (false, true, true),
            DatasetName::DOmegaEll => (true, false, true),
            DatasetName::DOmegaSigmaEll => (true, true, true),
            DatasetName::Jump => (false, false, false),
        }
    }
}

impl std::fmt::Display for DatasetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn profile(t: f64, base: f64, amp: f64, phase: f64, varying: bool) -> f64 {
    if varying {
        (base.ln() + amp * (std::f64::consts::TAU * t + phase).sin()).exp()
    } else {
        base
    }
}

/// Generate one synthetic dataset with `n` points on an even grid over
/// [0, 1]. Deterministic for a fixed seed; the generating latents are
/// recorded (in normalized units) for every non-jump dataset.
pub fn generate_dataset(name: DatasetName, n: usize, seed: u64) -> Result<Dataset> {
    if n < 4 {
        return Err(NsgpError::Domain(format!("dataset size {n} too small (need >= 4)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DVector::from_fn(n, |i, _| i as f64 / (n - 1) as f64);

    if name == DatasetName::Jump {
        let y = DVector::from_fn(n, |i, _| {
            let t = x[i];
            let level = if t >= JUMP_AT { JUMP_SIZE } else { 0.0 };
            0.4 * (JUMP_FREQ * std::f64::consts::PI * t).sin()
                + level
                + JUMP_NOISE * rng.sample::<f64, _>(StandardNormal)
        });
        let mut ds = Dataset::from_raw(name.as_str(), x, y)?;
        ds.truth = None;
        return Ok(ds);
    }

    let (vary_ell, vary_sigma, vary_omega) = name.varies();
    let ell = DVector::from_fn(n, |i, _| profile(x[i], ELL_BASE, ELL_AMP, ELL_PHASE, vary_ell));
    let sigma =
        DVector::from_fn(n, |i, _| profile(x[i], SIGMA_BASE, SIGMA_AMP, SIGMA_PHASE, vary_sigma));
    let omega = DVector::from_fn(n, |i, _| {
        if vary_omega {
            (OMEGA_BASE.ln() + OMEGA_AMP * (std::f64::consts::TAU * x[i]).cos()).exp()
        } else {
            OMEGA_BASE
        }
    });

    // draw the signal from the input-dependent prior
    let k = nonstationary_kernel(&x, &x, &ell, &ell, &sigma, &sigma)?.entries;
    let jc = cholesky_kernel(&k, "dataset generator")?;
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let f = jc.chol.l() * z;
    let y = DVector::from_fn(n, |i, _| f[i] + omega[i] * rng.sample::<f64, _>(StandardNormal));

    let mut ds = Dataset::from_raw(name.as_str(), x, y)?;
    // record the truth in normalized units
    let norm = ds.norm;
    ds.truth = Some(LatentTruth {
        ell: ell.map(|v| v / norm.x_scale),
        sigma: sigma.map(|v| v / norm.y_scale),
        omega: omega.map(|v| v / norm.y_scale),
    });
    Ok(ds)
}
