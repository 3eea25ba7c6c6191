//! Predictions at new inputs.
//!
//! The latent log functions are extrapolated from the training inputs to
//! the targets through their GP prior conditionals; each latent sample
//! then yields one Gaussian component for the unknown function via the
//! usual cross-covariance formulas, with all kernel blocks evaluated under
//! the input-dependent covariance. MAP predictions are a mixture over `s`
//! conditional draws (`s = 1` uses the conditional means); HMC predictions
//! average over the posterior draws as well.

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NsgpError, Result};
use crate::infer_hmc::SampleSet;
use crate::infer_map::MapResult;
use crate::kernel::{cholesky_kernel, cholesky_with_jitter, nonstationary_kernel, se_kernel};
use crate::model::{Hyperparams, Latent, LatentKind, LatentState};

/// Gaussian conditional of one latent component at the targets.
#[derive(Debug, Clone)]
pub struct LatentConditional {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// One Gaussian component of a predictive mixture: moments of the latent
/// function over the targets plus the target noise standard deviations
/// used when observations (not latent values) are scored.
#[derive(Debug, Clone)]
pub struct PredictiveComponent {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub noise_sd: DVector<f64>,
}

/// A uniformly weighted mixture of Gaussian components.
#[derive(Debug, Clone)]
pub struct PredictiveMixture {
    pub components: Vec<PredictiveComponent>,
}

impl PredictiveMixture {
    pub fn uniform(components: Vec<PredictiveComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(NsgpError::Empty("PredictiveMixture::uniform"));
        }
        Ok(PredictiveMixture { components })
    }

    pub fn weight(&self) -> f64 {
        1.0 / self.components.len() as f64
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Mixture mean and pointwise variance (law of total variance).
pub fn mixture_moments(mix: &PredictiveMixture) -> (DVector<f64>, DVector<f64>) {
    let m = mix.components.len() as f64;
    let dim = mix.components[0].mean.len();
    let mut mean = DVector::zeros(dim);
    for c in &mix.components {
        mean += &c.mean;
    }
    mean /= m;
    let mut var = DVector::zeros(dim);
    for c in &mix.components {
        for i in 0..dim {
            let dev = c.mean[i] - mean[i];
            var[i] += c.cov[(i, i)] + dev * dev;
        }
    }
    var /= m;
    (mean, var)
}

/// Pointwise mean of the target noise variance across components.
pub fn mixture_noise_variance(mix: &PredictiveMixture) -> DVector<f64> {
    let m = mix.components.len() as f64;
    let dim = mix.components[0].noise_sd.len();
    let mut nv = DVector::zeros(dim);
    for c in &mix.components {
        for i in 0..dim {
            nv[i] += c.noise_sd[i] * c.noise_sd[i];
        }
    }
    nv / m
}

/// GP conditional of one latent component at the targets given its values
/// at the training inputs, under that component's squared exponential
/// prior. The mean reverts to the prior mean far from the data.
pub fn latent_conditional(
    values: &DVector<f64>,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
    kind: LatentKind,
) -> Result<LatentConditional> {
    if x.is_empty() {
        return Err(NsgpError::Empty("latent_conditional: no training inputs"));
    }
    if values.len() != x.len() {
        return Err(NsgpError::Dimension {
            context: "latent_conditional",
            expected: x.len(),
            got: values.len(),
        });
    }
    let (alpha, beta, mu) = (theta.alpha(kind), theta.beta(kind), theta.mu(kind));
    let gram = se_kernel(x, x, alpha, beta)?.entries;
    let jc = cholesky_kernel(&gram, "latent conditional gram")?;
    let cross = se_kernel(x, x_star, alpha, beta)?.entries;
    let target = se_kernel(x_star, x_star, alpha, beta)?.entries;

    let centered = values - DVector::from_element(values.len(), mu);
    let mean = cross.transpose() * jc.chol.solve(&centered)
        + DVector::from_element(x_star.len(), mu);
    let mut cov = target - cross.transpose() * jc.chol.solve(&cross);
    cov = (&cov + cov.transpose()) * 0.5;
    Ok(LatentConditional { mean, cov })
}

/// Target-side latent values for one component: the conditional mean, or
/// `s` draws from the conditional when `sample` is set. Stationary scalars
/// replicate their constant at the targets.
fn target_latents(
    latent: &Latent,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
    kind: LatentKind,
    s: usize,
    sample: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DVector<f64>>> {
    match latent {
        Latent::Scalar(c) => Ok(vec![DVector::from_element(x_star.len(), *c); s]),
        Latent::Field(v) => {
            let cond = latent_conditional(v, x, x_star, theta, kind)?;
            if !sample {
                return Ok(vec![cond.mean; s]);
            }
            let jc = cholesky_kernel(&cond.cov, "latent conditional covariance")?;
            let l = jc.chol.l();
            Ok((0..s)
                .map(|_| {
                    let z = DVector::from_fn(x_star.len(), |_, _| {
                        rng.sample::<f64, _>(StandardNormal)
                    });
                    &cond.mean + &l * z
                })
                .collect())
        }
    }
}

/// Predictive mixture at `x_star` for one latent state: `s` components,
/// one per conditional draw of the lengthscale and signal latents (the
/// conditional means when `s = 1`); the noise latent always uses its
/// conditional mean.
pub fn predict_at_state(
    state: &LatentState,
    y: &DVector<f64>,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
    s: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PredictiveComponent>> {
    if s == 0 {
        return Err(NsgpError::Domain("conditional sample count must be >= 1".into()));
    }
    let n = x.len();
    let ell = state.ell.natural_values(n);
    let sigma = state.sigma.natural_values(n);
    let omega = state.omega.natural_values(n);

    // training-side factorization is shared by every component
    let k_train = nonstationary_kernel(x, x, &ell, &ell, &sigma, &sigma)?.entries;
    let mut k_y = k_train;
    for i in 0..n {
        k_y[(i, i)] += omega[i] * omega[i];
    }
    let jc = cholesky_with_jitter(&k_y, 0.0, "predictive train covariance")?;
    let alpha_vec = jc.chol.solve(y);

    let sample = s > 1;
    let ell_stars = target_latents(&state.ell, x, x_star, theta, LatentKind::Lengthscale, s, sample, rng)?;
    let sigma_stars = target_latents(&state.sigma, x, x_star, theta, LatentKind::SignalSd, s, sample, rng)?;
    // noise at the targets: conditional mean only
    let omega_star = target_latents(&state.omega, x, x_star, theta, LatentKind::NoiseSd, 1, false, rng)?
        .pop()
        .unwrap();
    let noise_sd = omega_star.map(f64::exp);

    let mut components = Vec::with_capacity(s);
    for (ell_star_log, sigma_star_log) in ell_stars.iter().zip(&sigma_stars) {
        let ell_star = ell_star_log.map(f64::exp);
        let sigma_star = sigma_star_log.map(f64::exp);
        let cross = nonstationary_kernel(x, x_star, &ell, &ell_star, &sigma, &sigma_star)?.entries;
        let target =
            nonstationary_kernel(x_star, x_star, &ell_star, &ell_star, &sigma_star, &sigma_star)?
                .entries;
        let mean = cross.transpose() * &alpha_vec;
        let mut cov = target - cross.transpose() * jc.chol.solve(&cross);
        cov = (&cov + cov.transpose()) * 0.5;
        components.push(PredictiveComponent { mean, cov, noise_sd: noise_sd.clone() });
    }
    Ok(components)
}

/// Predictive mixture at the MAP solution.
pub fn predict_map(
    map: &MapResult,
    y: &DVector<f64>,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
    s: usize,
    seed: u64,
) -> Result<PredictiveMixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let components = predict_at_state(&map.state, y, x, x_star, theta, s, &mut rng)?;
    PredictiveMixture::uniform(components)
}

/// Natural-scale posterior means of the three latents at the targets:
/// each draw is extrapolated by its conditional mean, exponentiated, and
/// averaged. Returned in (ell, sigma, omega) order.
pub fn latent_target_means(
    samples: &SampleSet,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
) -> Result<[DVector<f64>; 3]> {
    if samples.is_empty() {
        return Err(NsgpError::Empty("latent_target_means: no samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out = [
        DVector::zeros(x_star.len()),
        DVector::zeros(x_star.len()),
        DVector::zeros(x_star.len()),
    ];
    for sample in &samples.samples {
        for (slot, kind) in [LatentKind::Lengthscale, LatentKind::SignalSd, LatentKind::NoiseSd]
            .into_iter()
            .enumerate()
        {
            let mean_log = target_latents(
                sample.state.component(kind),
                x,
                x_star,
                theta,
                kind,
                1,
                false,
                &mut rng,
            )?
            .pop()
            .unwrap();
            out[slot] += mean_log.map(f64::exp);
        }
    }
    let m = samples.len() as f64;
    for v in &mut out {
        *v /= m;
    }
    Ok(out)
}

/// Predictive mixture averaged over the posterior draws: `s` components
/// per draw, all uniformly weighted.
pub fn predict_hmc(
    samples: &SampleSet,
    y: &DVector<f64>,
    x: &DVector<f64>,
    x_star: &DVector<f64>,
    theta: &Hyperparams,
    s: usize,
    seed: u64,
) -> Result<PredictiveMixture> {
    if samples.is_empty() {
        return Err(NsgpError::Empty("predict_hmc: no samples"));
    }
    let mut components = Vec::with_capacity(samples.len() * s);
    for (i, sample) in samples.samples.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        components.extend(predict_at_state(&sample.state, y, x, x_star, theta, s, &mut rng)?);
    }
    PredictiveMixture::uniform(components)
}
