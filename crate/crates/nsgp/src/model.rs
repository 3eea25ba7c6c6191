//! Model state: hyperparameters, variant flags, latent vectors, prior
//! Cholesky factors, and the whitening transforms used by both inference
//! backends.
//!
//! Latent functions live in the log domain. A stationary component is
//! stored as a single scalar and replicated on demand; its prior is a
//! univariate normal `N(log mu_c, alpha_c^2)`. Nonstationary components
//! carry a full length-n vector with a squared exponential GP prior.
//! Whitening maps a nonstationary vector `v` to `L^{-1} (v - mu)` where
//! `L L^T` is the (jittered) prior covariance; stationary scalars pass
//! through unchanged.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{NsgpError, Result};
use crate::kernel::{cholesky_kernel, se_kernel};

/// Which latent component a value or gradient refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentKind {
    Lengthscale,
    SignalSd,
    NoiseSd,
}

pub const LATENT_KINDS: [LatentKind; 3] =
    [LatentKind::Lengthscale, LatentKind::SignalSd, LatentKind::NoiseSd];

/// Coordinate frame of a latent state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Natural,
    Whitened,
}

/// The nine fixed prior parameters. Means are stored in the log domain;
/// use [`Hyperparams::from_original_means`] to pass means on the original
/// scale (the default reading) or [`Hyperparams::from_log_means`] for the
/// literal log-domain reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub mu_ell: f64,
    pub mu_sigma: f64,
    pub mu_omega: f64,
    pub alpha_ell: f64,
    pub alpha_sigma: f64,
    pub alpha_omega: f64,
    pub beta_ell: f64,
    pub beta_sigma: f64,
    pub beta_omega: f64,
}

impl Hyperparams {
    pub fn from_log_means(
        mu_ell: f64,
        mu_sigma: f64,
        mu_omega: f64,
        alphas: (f64, f64, f64),
        betas: (f64, f64, f64),
    ) -> Result<Self> {
        let hp = Hyperparams {
            mu_ell,
            mu_sigma,
            mu_omega,
            alpha_ell: alphas.0,
            alpha_sigma: alphas.1,
            alpha_omega: alphas.2,
            beta_ell: betas.0,
            beta_sigma: betas.1,
            beta_omega: betas.2,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn from_original_means(
        mu_ell: f64,
        mu_sigma: f64,
        mu_omega: f64,
        alphas: (f64, f64, f64),
        betas: (f64, f64, f64),
    ) -> Result<Self> {
        for (name, m) in [("mu_ell", mu_ell), ("mu_sigma", mu_sigma), ("mu_omega", mu_omega)] {
            if !(m > 0.0) || !m.is_finite() {
                return Err(NsgpError::Domain(format!(
                    "{name} = {m} must be strictly positive on the original scale"
                )));
            }
        }
        Self::from_log_means(mu_ell.ln(), mu_sigma.ln(), mu_omega.ln(), alphas, betas)
    }

    /// The hyperparameter values used throughout the experiments:
    /// means 0.2 / 0.5 / 0.1 on the original scale, all alphas 1,
    /// beta_ell = beta_sigma = 0.1 and beta_omega = 0.2.
    pub fn defaults() -> Self {
        Self::from_original_means(0.2, 0.5, 0.1, (1.0, 1.0, 1.0), (0.1, 0.1, 0.2)).unwrap()
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha_ell", self.alpha_ell),
            ("alpha_sigma", self.alpha_sigma),
            ("alpha_omega", self.alpha_omega),
            ("beta_ell", self.beta_ell),
            ("beta_sigma", self.beta_sigma),
            ("beta_omega", self.beta_omega),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(NsgpError::Domain(format!("{name} = {v} must be strictly positive")));
            }
        }
        for (name, v) in [
            ("mu_ell", self.mu_ell),
            ("mu_sigma", self.mu_sigma),
            ("mu_omega", self.mu_omega),
        ] {
            if !v.is_finite() {
                return Err(NsgpError::Domain(format!("{name} = {v} must be finite")));
            }
        }
        Ok(())
    }

    /// Log-domain prior mean of one component.
    pub fn mu(&self, kind: LatentKind) -> f64 {
        match kind {
            LatentKind::Lengthscale => self.mu_ell,
            LatentKind::SignalSd => self.mu_sigma,
            LatentKind::NoiseSd => self.mu_omega,
        }
    }

    pub fn alpha(&self, kind: LatentKind) -> f64 {
        match kind {
            LatentKind::Lengthscale => self.alpha_ell,
            LatentKind::SignalSd => self.alpha_sigma,
            LatentKind::NoiseSd => self.alpha_omega,
        }
    }

    pub fn beta(&self, kind: LatentKind) -> f64 {
        match kind {
            LatentKind::Lengthscale => self.beta_ell,
            LatentKind::SignalSd => self.beta_sigma,
            LatentKind::NoiseSd => self.beta_omega,
        }
    }
}

/// Which latent components are input-dependent. All 8 combinations are
/// valid; all-false is a plain stationary GP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantFlags {
    pub nonstat_omega: bool,
    pub nonstat_sigma: bool,
    pub nonstat_ell: bool,
}

impl VariantFlags {
    pub fn stationary() -> Self {
        VariantFlags { nonstat_omega: false, nonstat_sigma: false, nonstat_ell: false }
    }

    pub fn fully_nonstationary() -> Self {
        VariantFlags { nonstat_omega: true, nonstat_sigma: true, nonstat_ell: true }
    }

    pub fn is_nonstat(&self, kind: LatentKind) -> bool {
        match kind {
            LatentKind::Lengthscale => self.nonstat_ell,
            LatentKind::SignalSd => self.nonstat_sigma,
            LatentKind::NoiseSd => self.nonstat_omega,
        }
    }

    /// Length of the flat parameter vector for n training points.
    pub fn param_len(&self, n: usize) -> usize {
        LATENT_KINDS
            .iter()
            .map(|&k| if self.is_nonstat(k) { n } else { 1 })
            .sum()
    }

    pub fn all_combinations() -> Vec<VariantFlags> {
        let mut out = Vec::with_capacity(8);
        for &o in &[false, true] {
            for &s in &[false, true] {
                for &l in &[false, true] {
                    out.push(VariantFlags { nonstat_omega: o, nonstat_sigma: s, nonstat_ell: l });
                }
            }
        }
        out
    }

    /// The seven model variants used in the benchmark tables:
    /// gp, omega, sigma, ell, omega-sigma, omega-ell, omega-sigma-ell.
    pub fn benchmark_variants() -> Vec<VariantFlags> {
        ["gp", "omega", "sigma", "ell", "omega-sigma", "omega-ell", "omega-sigma-ell"]
            .iter()
            .map(|s| VariantFlags::from_name(s).unwrap())
            .collect()
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let mut flags = VariantFlags::stationary();
        if name == "gp" || name.is_empty() {
            return Ok(flags);
        }
        for part in name.split('-') {
            match part {
                "omega" => flags.nonstat_omega = true,
                "sigma" => flags.nonstat_sigma = true,
                "ell" => flags.nonstat_ell = true,
                other => {
                    return Err(NsgpError::UnknownName(format!(
                        "variant component '{other}' (expected gp, omega, sigma, ell joined by '-')"
                    )))
                }
            }
        }
        Ok(flags)
    }

    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if self.nonstat_omega {
            parts.push("omega");
        }
        if self.nonstat_sigma {
            parts.push("sigma");
        }
        if self.nonstat_ell {
            parts.push("ell");
        }
        if parts.is_empty() {
            "gp".to_string()
        } else {
            parts.join("-")
        }
    }
}

impl fmt::Display for VariantFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// One latent component in the log domain: a full vector when the
/// component is input-dependent, a single replicated scalar otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Latent {
    Field(DVector<f64>),
    Scalar(f64),
}

impl Latent {
    /// Log-domain values replicated to length n.
    pub fn log_values(&self, n: usize) -> DVector<f64> {
        match self {
            Latent::Field(v) => v.clone(),
            Latent::Scalar(c) => DVector::from_element(n, *c),
        }
    }

    /// Natural-scale (exponentiated) values replicated to length n.
    pub fn natural_values(&self, n: usize) -> DVector<f64> {
        self.log_values(n).map(f64::exp)
    }

    pub fn flat_len(&self) -> usize {
        match self {
            Latent::Field(v) => v.len(),
            Latent::Scalar(_) => 1,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Latent::Field(v) => v.iter().all(|x| x.is_finite()),
            Latent::Scalar(c) => c.is_finite(),
        }
    }
}

/// The three log-latent vectors, tagged with their coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub ell: Latent,
    pub sigma: Latent,
    pub omega: Latent,
    pub frame: Frame,
}

impl LatentState {
    /// State at the prior mean (natural frame).
    pub fn at_prior_mean(theta: &Hyperparams, flags: &VariantFlags, n: usize) -> Self {
        let make = |kind: LatentKind| {
            if flags.is_nonstat(kind) {
                Latent::Field(DVector::from_element(n, theta.mu(kind)))
            } else {
                Latent::Scalar(theta.mu(kind))
            }
        };
        LatentState {
            ell: make(LatentKind::Lengthscale),
            sigma: make(LatentKind::SignalSd),
            omega: make(LatentKind::NoiseSd),
            frame: Frame::Natural,
        }
    }

    pub fn component(&self, kind: LatentKind) -> &Latent {
        match kind {
            LatentKind::Lengthscale => &self.ell,
            LatentKind::SignalSd => &self.sigma,
            LatentKind::NoiseSd => &self.omega,
        }
    }

    pub fn component_mut(&mut self, kind: LatentKind) -> &mut Latent {
        match kind {
            LatentKind::Lengthscale => &mut self.ell,
            LatentKind::SignalSd => &mut self.sigma,
            LatentKind::NoiseSd => &mut self.omega,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.ell.is_finite() && self.sigma.is_finite() && self.omega.is_finite()
    }

    /// Pack into a flat vector with blocks ordered ell, sigma, omega.
    pub fn to_flat(&self) -> DVector<f64> {
        let total = self.ell.flat_len() + self.sigma.flat_len() + self.omega.flat_len();
        let mut out = DVector::zeros(total);
        let mut at = 0;
        for kind in LATENT_KINDS {
            match self.component(kind) {
                Latent::Field(v) => {
                    out.rows_mut(at, v.len()).copy_from(v);
                    at += v.len();
                }
                Latent::Scalar(c) => {
                    out[at] = *c;
                    at += 1;
                }
            }
        }
        out
    }

    /// Unpack a flat vector produced by [`to_flat`](Self::to_flat).
    pub fn from_flat(
        flat: &DVector<f64>,
        flags: &VariantFlags,
        n: usize,
        frame: Frame,
    ) -> Result<Self> {
        let expected = flags.param_len(n);
        if flat.len() != expected {
            return Err(NsgpError::Dimension {
                context: "LatentState::from_flat",
                expected,
                got: flat.len(),
            });
        }
        let mut at = 0;
        let mut take = |kind: LatentKind| {
            if flags.is_nonstat(kind) {
                let v = flat.rows(at, n).into_owned();
                at += n;
                Latent::Field(v)
            } else {
                let c = flat[at];
                at += 1;
                Latent::Scalar(c)
            }
        };
        Ok(LatentState {
            ell: take(LatentKind::Lengthscale),
            sigma: take(LatentKind::SignalSd),
            omega: take(LatentKind::NoiseSd),
            frame,
        })
    }
}

/// Lower-triangular Cholesky factor of one latent prior covariance.
#[derive(Debug, Clone)]
pub struct ComponentFactor {
    /// Lower factor of the jittered prior covariance.
    pub l: DMatrix<f64>,
    /// Absolute jitter added before factorization.
    pub jitter: f64,
    /// Sum of log diagonal entries of `l` (half the log determinant).
    pub half_log_det: f64,
}

/// Cholesky factors of the three latent GP prior covariances at the
/// training inputs. Fixed once the inputs and hyperparameters are known.
#[derive(Debug, Clone)]
pub struct PriorFactors {
    pub n: usize,
    pub ell: ComponentFactor,
    pub sigma: ComponentFactor,
    pub omega: ComponentFactor,
}

impl PriorFactors {
    pub fn factor(&self, kind: LatentKind) -> &ComponentFactor {
        match kind {
            LatentKind::Lengthscale => &self.ell,
            LatentKind::SignalSd => &self.sigma,
            LatentKind::NoiseSd => &self.omega,
        }
    }
}

/// Build the three prior Cholesky factors at the training inputs.
pub fn build_prior_factors(x: &DVector<f64>, theta: &Hyperparams) -> Result<PriorFactors> {
    let n = x.len();
    if n == 0 {
        return Err(NsgpError::Empty("build_prior_factors: no training inputs"));
    }
    let build = |kind: LatentKind| -> Result<ComponentFactor> {
        let gram = se_kernel(x, x, theta.alpha(kind), theta.beta(kind))?;
        let jc = cholesky_kernel(&gram.entries, "latent prior covariance")?;
        let l = jc.chol.l();
        let half_log_det = (0..n).map(|i| l[(i, i)].ln()).sum();
        Ok(ComponentFactor { l, jitter: jc.jitter, half_log_det })
    };
    Ok(PriorFactors {
        n,
        ell: build(LatentKind::Lengthscale)?,
        sigma: build(LatentKind::SignalSd)?,
        omega: build(LatentKind::NoiseSd)?,
    })
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    l.solve_lower_triangular(b)
        .ok_or_else(|| NsgpError::Numerical("singular triangular factor".into()))
}

/// Map a natural-frame state to whitened coordinates: each nonstationary
/// component becomes `L^{-1} (v - mu)`; stationary scalars pass through.
pub fn whiten(
    state: &LatentState,
    factors: &PriorFactors,
    theta: &Hyperparams,
) -> Result<LatentState> {
    if state.frame != Frame::Natural {
        return Err(NsgpError::FrameMismatch { expected: "natural" });
    }
    let mut out = state.clone();
    for kind in LATENT_KINDS {
        if let Latent::Field(v) = state.component(kind) {
            let centered = v - DVector::from_element(v.len(), theta.mu(kind));
            let w = solve_lower(&factors.factor(kind).l, &centered)?;
            *out.component_mut(kind) = Latent::Field(w);
        }
    }
    out.frame = Frame::Whitened;
    Ok(out)
}

/// Inverse of [`whiten`]: each nonstationary component becomes `L w + mu`.
pub fn unwhiten(
    state: &LatentState,
    factors: &PriorFactors,
    theta: &Hyperparams,
) -> Result<LatentState> {
    if state.frame != Frame::Whitened {
        return Err(NsgpError::FrameMismatch { expected: "whitened" });
    }
    let mut out = state.clone();
    for kind in LATENT_KINDS {
        if let Latent::Field(w) = state.component(kind) {
            let v = &factors.factor(kind).l * w + DVector::from_element(w.len(), theta.mu(kind));
            *out.component_mut(kind) = Latent::Field(v);
        }
    }
    out.frame = Frame::Natural;
    Ok(out)
}

/// Pull a natural-frame gradient of one component back to whitened
/// coordinates: `L^T g`. A length-1 gradient (stationary scalar) passes
/// through unchanged.
pub fn whitened_gradient(
    g_natural: &DVector<f64>,
    factors: &PriorFactors,
    kind: LatentKind,
) -> Result<DVector<f64>> {
    if g_natural.len() == 1 {
        return Ok(g_natural.clone());
    }
    if g_natural.len() != factors.n {
        return Err(NsgpError::Dimension {
            context: "whitened_gradient",
            expected: factors.n,
            got: g_natural.len(),
        });
    }
    Ok(factors.factor(kind).l.transpose() * g_natural)
}

/// Parsed key-value configuration: hyperparameters, variant flags, seed,
/// and inference options. See the crate README for the key list.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub theta: Hyperparams,
    pub flags: VariantFlags,
    pub seed: u64,
    pub mu_in_log_domain: bool,
    pub map_restarts: usize,
    pub map_max_iters: usize,
    pub map_grad_tol: f64,
    pub hmc_step_size: f64,
    pub hmc_max_depth: usize,
    pub hmc_samples: usize,
    pub hmc_warmup: Option<usize>,
    pub hmc_chains: usize,
    pub hmc_thin: usize,
    pub predict_samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            theta: Hyperparams::defaults(),
            flags: VariantFlags::fully_nonstationary(),
            seed: 0,
            mu_in_log_domain: false,
            map_restarts: 10,
            map_max_iters: 2000,
            map_grad_tol: 1e-5,
            hmc_step_size: 0.01,
            hmc_max_depth: 10,
            hmc_samples: 1000,
            hmc_warmup: None,
            hmc_chains: 10,
            hmc_thin: 10,
            predict_samples: 1,
        }
    }
}

impl Config {
    /// Parse a plain-text `key value` (or `key = value`) configuration.
    /// Lines starting with `#` and blank lines are ignored. Unknown keys
    /// are an error.
    pub fn parse(text: &str, path: &str) -> Result<Config> {
        let mut raw: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cleaned = line.replacen('=', " ", 1);
            let mut parts = cleaned.split_whitespace();
            let key = parts.next().unwrap_or_default().to_string();
            let value = parts.next().map(str::to_string);
            let (value, extra) = (value, parts.next());
            match (value, extra) {
                (Some(v), None) => {
                    raw.insert(key, (v, lineno + 1));
                }
                _ => {
                    return Err(NsgpError::Parse {
                        path: path.to_string(),
                        line: lineno + 1,
                        msg: format!("expected 'key value', got '{line}'"),
                    });
                }
            }
        }

        let parse_err = |line: usize, msg: String| NsgpError::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut take_f64 = |key: &str, default: f64| -> Result<f64> {
            match raw.remove(key) {
                Some((v, line)) => v
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("{key}: {e}"))),
                None => Ok(default),
            }
        };

        let mu_ell = take_f64("mu_ell", 0.2)?;
        let mu_sigma = take_f64("mu_sigma", 0.5)?;
        let mu_omega = take_f64("mu_omega", 0.1)?;
        let alpha_ell = take_f64("alpha_ell", 1.0)?;
        let alpha_sigma = take_f64("alpha_sigma", 1.0)?;
        let alpha_omega = take_f64("alpha_omega", 1.0)?;
        let beta_ell = take_f64("beta_ell", 0.1)?;
        let beta_sigma = take_f64("beta_sigma", 0.1)?;
        let beta_omega = take_f64("beta_omega", 0.2)?;
        let map_grad_tol = take_f64("map_grad_tol", 1e-5)?;
        let hmc_step_size = take_f64("hmc_step_size", 0.01)?;

        let mut take_bool = |key: &str, default: bool| -> Result<bool> {
            match raw.remove(key) {
                Some((v, line)) => match v.as_str() {
                    "true" | "1" | "yes" => Ok(true),
                    "false" | "0" | "no" => Ok(false),
                    other => Err(parse_err(line, format!("{key}: expected true/false, got '{other}'"))),
                },
                None => Ok(default),
            }
        };
        let nonstat_omega = take_bool("nonstat_omega", true)?;
        let nonstat_sigma = take_bool("nonstat_sigma", true)?;
        let nonstat_ell = take_bool("nonstat_ell", true)?;
        let mu_in_log_domain = take_bool("mu_in_log_domain", false)?;

        let mut take_usize = |key: &str, default: usize| -> Result<usize> {
            match raw.remove(key) {
                Some((v, line)) => v
                    .parse::<usize>()
                    .map_err(|e| parse_err(line, format!("{key}: {e}"))),
                None => Ok(default),
            }
        };
        let seed = take_usize("seed", 0)? as u64;
        let map_restarts = take_usize("map_restarts", 10)?;
        let map_max_iters = take_usize("map_max_iters", 2000)?;
        let hmc_max_depth = take_usize("hmc_max_depth", 10)?;
        let hmc_samples = take_usize("hmc_samples", 1000)?;
        let hmc_chains = take_usize("hmc_chains", 10)?;
        let hmc_thin = take_usize("hmc_thin", 10)?;
        let predict_samples = take_usize("predict_samples", 1)?;
        let hmc_warmup = match raw.remove("hmc_warmup") {
            Some((v, line)) => Some(
                v.parse::<usize>()
                    .map_err(|e| parse_err(line, format!("hmc_warmup: {e}")))?,
            ),
            None => None,
        };

        if let Some((key, (_, line))) = raw.into_iter().next() {
            return Err(NsgpError::Parse {
                path: path.to_string(),
                line,
                msg: format!("unknown key '{key}'"),
            });
        }

        let alphas = (alpha_ell, alpha_sigma, alpha_omega);
        let betas = (beta_ell, beta_sigma, beta_omega);
        let theta = if mu_in_log_domain {
            Hyperparams::from_log_means(mu_ell, mu_sigma, mu_omega, alphas, betas)?
        } else {
            Hyperparams::from_original_means(mu_ell, mu_sigma, mu_omega, alphas, betas)?
        };
        Ok(Config {
            theta,
            flags: VariantFlags { nonstat_omega, nonstat_sigma, nonstat_ell },
            seed,
            mu_in_log_domain,
            map_restarts,
            map_max_iters,
            map_grad_tol,
            hmc_step_size,
            hmc_max_depth,
            hmc_samples,
            hmc_warmup,
            hmc_chains,
            hmc_thin,
            predict_samples,
        })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| NsgpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::parse(&text, &path.display().to_string())
    }

    /// Warmup draws per chain: explicit value, or 20% of the kept draws.
    pub fn warmup(&self) -> usize {
        self.hmc_warmup.unwrap_or(self.hmc_samples.div_ceil(5))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_inputs(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.random::<f64>())
    }

    #[test]
    fn prior_factor_scalar_case() {
        let theta = Hyperparams::defaults();
        let x = DVector::from_column_slice(&[0.3]);
        let f = build_prior_factors(&x, &theta).unwrap();
        // 1x1 factor is just alpha (up to jitter)
        assert_relative_eq!(f.ell.l[(0, 0)], theta.alpha_ell, epsilon = 1e-6);
        assert_relative_eq!(f.omega.l[(0, 0)], theta.alpha_omega, epsilon = 1e-6);
    }

    #[test]
    fn prior_factor_degenerate_inputs_need_jitter() {
        let theta = Hyperparams::defaults();
        let x = DVector::from_column_slice(&[0.5, 0.5]);
        let f = build_prior_factors(&x, &theta).unwrap();
        assert!(f.ell.jitter > 0.0);
    }

    #[test]
    fn prior_factor_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let theta = Hyperparams::from_original_means(
            1.0, 1.0, 1.0, (1.0, 1.0, 1.0), (0.1, 0.1, 0.2),
        )
        .unwrap();
        let x = random_inputs(20, &mut rng);
        let f = build_prior_factors(&x, &theta).unwrap();
        for kind in LATENT_KINDS {
            let cf = f.factor(kind);
            let rebuilt = &cf.l * cf.l.transpose();
            let mut target = se_kernel(&x, &x, theta.alpha(kind), theta.beta(kind))
                .unwrap()
                .entries;
            for i in 0..20 {
                target[(i, i)] += cf.jitter;
            }
            let rel = (&rebuilt - &target).norm() / target.norm();
            assert!(rel <= 1e-8, "relative Frobenius error {rel}");
        }
    }

    #[test]
    fn whiten_inverts_known_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = Hyperparams::defaults();
        let n = 12;
        let x = random_inputs(n, &mut rng);
        let f = build_prior_factors(&x, &theta).unwrap();
        let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = &f.ell.l * &u + DVector::from_element(n, theta.mu_ell);
        let state = LatentState {
            ell: Latent::Field(v),
            sigma: Latent::Scalar(theta.mu_sigma),
            omega: Latent::Scalar(theta.mu_omega),
            frame: Frame::Natural,
        };
        let w = whiten(&state, &f, &theta).unwrap();
        match &w.ell {
            Latent::Field(got) => assert!((got - &u).abs().max() <= 1e-10),
            _ => panic!("expected field"),
        }
        // scalars untouched
        assert_eq!(w.sigma, state.sigma);
        let back = unwhiten(&w, &f, &theta).unwrap();
        match (&back.ell, &state.ell) {
            (Latent::Field(a), Latent::Field(b)) => assert!((a - b).abs().max() <= 1e-10),
            _ => panic!(),
        }
    }

    #[test]
    fn whiten_zero_maps_to_zero_under_zero_mean() {
        // with unit original-scale means the log-domain means are zero
        let theta =
            Hyperparams::from_original_means(1.0, 1.0, 1.0, (1.0, 1.0, 1.0), (0.1, 0.1, 0.2))
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_inputs(6, &mut rng);
        let f = build_prior_factors(&x, &theta).unwrap();
        let state = LatentState {
            ell: Latent::Field(DVector::zeros(6)),
            sigma: Latent::Field(DVector::zeros(6)),
            omega: Latent::Field(DVector::zeros(6)),
            frame: Frame::Natural,
        };
        let w = whiten(&state, &f, &theta).unwrap();
        for kind in LATENT_KINDS {
            match w.component(kind) {
                Latent::Field(v) => assert!(v.abs().max() <= 1e-12),
                _ => panic!(),
            }
        }
    }

    #[test]
    fn whiten_requires_natural_frame() {
        let theta = Hyperparams::defaults();
        let x = DVector::from_column_slice(&[0.1, 0.9]);
        let f = build_prior_factors(&x, &theta).unwrap();
        let mut state = LatentState::at_prior_mean(&theta, &VariantFlags::stationary(), 2);
        state.frame = Frame::Whitened;
        assert!(matches!(whiten(&state, &f, &theta), Err(NsgpError::FrameMismatch { .. })));
        state.frame = Frame::Natural;
        assert!(matches!(unwhiten(&state, &f, &theta), Err(NsgpError::FrameMismatch { .. })));
    }

    #[test]
    fn roundtrip_all_variants() {
        let theta = Hyperparams::defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let x = random_inputs(n, &mut rng);
        let f = build_prior_factors(&x, &theta).unwrap();
        for flags in VariantFlags::all_combinations() {
            let flat = DVector::from_fn(flags.param_len(n), |_, _| {
                rng.sample::<f64, _>(StandardNormal)
            });
            let state = LatentState::from_flat(&flat, &flags, n, Frame::Natural).unwrap();
            let round = unwhiten(&whiten(&state, &f, &theta).unwrap(), &f, &theta).unwrap();
            assert!((round.to_flat() - state.to_flat()).abs().max() <= 1e-10, "{flags}");
        }
    }

    #[test]
    fn whitened_prior_is_standard_normal() {
        let theta = Hyperparams::defaults();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10;
        let x = random_inputs(n, &mut rng);
        let f = build_prior_factors(&x, &theta).unwrap();
        let draws = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..draws {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let v = &f.sigma.l * &z + DVector::from_element(n, theta.mu_sigma);
            let state = LatentState {
                ell: Latent::Scalar(theta.mu_ell),
                sigma: Latent::Field(v),
                omega: Latent::Scalar(theta.mu_omega),
                frame: Frame::Natural,
            };
            let w = whiten(&state, &f, &theta).unwrap();
            if let Latent::Field(ws) = &w.sigma {
                for &val in ws.iter() {
                    sum += val;
                    sum_sq += val * val;
                }
            }
        }
        let count = (draws * n) as f64;
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(mean.abs() <= 4.0 / count.sqrt(), "mean {mean}");
        assert!((0.9..=1.1).contains(&var), "var {var}");
    }

    #[test]
    fn flat_roundtrip() {
        let flags = VariantFlags { nonstat_omega: true, nonstat_sigma: false, nonstat_ell: true };
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let flat = DVector::from_fn(flags.param_len(n), |_, _| rng.random::<f64>());
        let state = LatentState::from_flat(&flat, &flags, n, Frame::Natural).unwrap();
        assert_eq!(state.to_flat(), flat);
        assert_eq!(state.ell.flat_len(), n);
        assert_eq!(state.sigma.flat_len(), 1);
    }

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let text = "\
# comment
mu_ell 0.3
mu_sigma = 0.4
nonstat_ell false
seed 7
map_restarts 3
hmc_step_size 0.02
";
        let cfg = Config::parse(text, "test.cfg").unwrap();
        assert_relative_eq!(cfg.theta.mu_ell, 0.3f64.ln());
        assert_relative_eq!(cfg.theta.mu_sigma, 0.4f64.ln());
        assert!(!cfg.flags.nonstat_ell);
        assert!(cfg.flags.nonstat_omega);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.map_restarts, 3);
        assert_relative_eq!(cfg.hmc_step_size, 0.02);

        let err = Config::parse("not_a_key 1\n", "test.cfg").unwrap_err();
        assert!(matches!(err, NsgpError::Parse { line: 1, .. }));

        // literal log-domain reading
        let cfg = Config::parse("mu_in_log_domain true\nmu_ell 0.2\n", "t").unwrap();
        assert_relative_eq!(cfg.theta.mu_ell, 0.2);
    }

    #[test]
    fn variant_names_roundtrip() {
        for flags in VariantFlags::all_combinations() {
            assert_eq!(VariantFlags::from_name(&flags.name()).unwrap(), flags);
        }
        assert!(VariantFlags::from_name("bogus").is_err());
        assert_eq!(VariantFlags::benchmark_variants().len(), 7);
    }
}
