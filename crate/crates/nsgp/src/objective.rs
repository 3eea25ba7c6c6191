//! Marginal log likelihood and its exact gradients.
//!
//! The objective is `log N(y | 0, K_f + Omega)` plus one log prior term per
//! latent component: a GP prior for nonstationary components, a univariate
//! normal for stationary scalars. Gradients with respect to every latent
//! entry are analytical; the lengthscale entries go through the "plus
//! matrix" derivative of the data covariance, the signal and noise entries
//! reduce to diagonals of matrix products. Everything is solved through
//! the Cholesky factor of `K_y`; no matrix is inverted by a generic route.

use nalgebra::{DMatrix, DVector};

use crate::error::{NsgpError, Result};
use crate::kernel::{cholesky_with_jitter, dk_dlog_lengthscale, nonstationary_kernel};
use crate::model::{
    build_prior_factors, unwhiten, whiten, whitened_gradient, Frame, Hyperparams, Latent,
    LatentKind, LatentState, PriorFactors, VariantFlags, LATENT_KINDS,
};

const LN_2PI: f64 = 1.8378770664093453;

/// Marginal log likelihood split into its additive parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MllValue {
    pub total: f64,
    pub data_term: f64,
    pub prior_ell: f64,
    pub prior_sigma: f64,
    pub prior_omega: f64,
}

/// Gradient of the marginal log likelihood with respect to the log
/// latents: length n for nonstationary components, length 1 for
/// stationary scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGradient {
    pub g_ell: DVector<f64>,
    pub g_sigma: DVector<f64>,
    pub g_omega: DVector<f64>,
}

impl LatentGradient {
    pub fn component(&self, kind: LatentKind) -> &DVector<f64> {
        match kind {
            LatentKind::Lengthscale => &self.g_ell,
            LatentKind::SignalSd => &self.g_sigma,
            LatentKind::NoiseSd => &self.g_omega,
        }
    }

    /// Pack into a flat vector with blocks ordered ell, sigma, omega,
    /// matching [`LatentState::to_flat`].
    pub fn to_flat(&self) -> DVector<f64> {
        let total = self.g_ell.len() + self.g_sigma.len() + self.g_omega.len();
        let mut out = DVector::zeros(total);
        let mut at = 0;
        for kind in LATENT_KINDS {
            let g = self.component(kind);
            out.rows_mut(at, g.len()).copy_from(g);
            at += g.len();
        }
        out
    }
}

/// The objective for one dataset: owns the training data, the prior
/// factors, and the variant flags, so repeated evaluations share all
/// fixed precomputation. Value and gradient are computed together from a
/// single factorization of `K_y`.
#[derive(Debug, Clone)]
pub struct Objective {
    y: DVector<f64>,
    x: DVector<f64>,
    theta: Hyperparams,
    flags: VariantFlags,
    factors: PriorFactors,
    data_term_enabled: bool,
}

impl Objective {
    pub fn new(
        y: &DVector<f64>,
        x: &DVector<f64>,
        theta: &Hyperparams,
        flags: &VariantFlags,
    ) -> Result<Self> {
        if y.len() != x.len() {
            return Err(NsgpError::Dimension {
                context: "Objective::new",
                expected: x.len(),
                got: y.len(),
            });
        }
        let factors = build_prior_factors(x, theta)?;
        Ok(Objective {
            y: y.clone(),
            x: x.clone(),
            theta: *theta,
            flags: *flags,
            factors,
            data_term_enabled: true,
        })
    }

    /// Same posterior with the data term switched off; the target is then
    /// exactly the latent prior (standard normal in whitened coordinates
    /// for nonstationary components). Used for sampler calibration.
    pub fn prior_only(
        y: &DVector<f64>,
        x: &DVector<f64>,
        theta: &Hyperparams,
        flags: &VariantFlags,
    ) -> Result<Self> {
        let mut obj = Self::new(y, x, theta, flags)?;
        obj.data_term_enabled = false;
        Ok(obj)
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn theta(&self) -> &Hyperparams {
        &self.theta
    }

    pub fn flags(&self) -> &VariantFlags {
        &self.flags
    }

    pub fn factors(&self) -> &PriorFactors {
        &self.factors
    }

    pub fn param_len(&self) -> usize {
        self.flags.param_len(self.n())
    }

    fn check_state(&self, state: &LatentState) -> Result<()> {
        if state.frame != Frame::Natural {
            return Err(NsgpError::FrameMismatch { expected: "natural" });
        }
        if !state.is_finite() {
            return Err(NsgpError::Numerical("non-finite latent state".into()));
        }
        for kind in LATENT_KINDS {
            let expected = if self.flags.is_nonstat(kind) { self.n() } else { 1 };
            if state.component(kind).flat_len() != expected {
                return Err(NsgpError::Dimension {
                    context: "Objective latent state",
                    expected,
                    got: state.component(kind).flat_len(),
                });
            }
        }
        Ok(())
    }

    /// One prior log density term and, optionally, its gradient.
    fn prior_term(&self, kind: LatentKind, latent: &Latent) -> Result<(f64, DVector<f64>)> {
        let mu = self.theta.mu(kind);
        match latent {
            Latent::Field(v) => {
                let n = v.len() as f64;
                let cf = self.factors.factor(kind);
                let centered = v - DVector::from_element(v.len(), mu);
                let w = cf
                    .l
                    .solve_lower_triangular(&centered)
                    .ok_or_else(|| NsgpError::Numerical("singular prior factor".into()))?;
                let value = -0.5 * w.norm_squared() - cf.half_log_det - 0.5 * n * LN_2PI;
                // -K^{-1}(v - mu) = -L^{-T} w
                let grad = -cf
                    .l
                    .tr_solve_lower_triangular(&w)
                    .ok_or_else(|| NsgpError::Numerical("singular prior factor".into()))?;
                Ok((value, grad))
            }
            Latent::Scalar(c) => {
                let a = self.theta.alpha(kind);
                let z = (c - mu) / a;
                let value = -0.5 * z * z - a.ln() - 0.5 * LN_2PI;
                let grad = DVector::from_element(1, -z / a);
                Ok((value, grad))
            }
        }
    }

    fn assemble(
        &self,
        data_term: f64,
        priors: [f64; 3],
    ) -> MllValue {
        let total = data_term + priors[0] + priors[1] + priors[2];
        MllValue {
            total,
            data_term,
            prior_ell: priors[0],
            prior_sigma: priors[1],
            prior_omega: priors[2],
        }
    }

    /// Marginal log likelihood at a natural-frame state.
    pub fn mll(&self, state: &LatentState) -> Result<MllValue> {
        self.check_state(state)?;
        let n = self.n();
        let mut priors = [0.0; 3];
        for (slot, kind) in LATENT_KINDS.iter().enumerate() {
            priors[slot] = self.prior_term(*kind, state.component(*kind))?.0;
        }
        if !self.data_term_enabled {
            return Ok(self.assemble(0.0, priors));
        }

        let ell = state.ell.natural_values(n);
        let sigma = state.sigma.natural_values(n);
        let omega = state.omega.natural_values(n);
        let k_f = nonstationary_kernel(&self.x, &self.x, &ell, &ell, &sigma, &sigma)?;
        let mut k_y = k_f.entries;
        for i in 0..n {
            k_y[(i, i)] += omega[i] * omega[i];
        }
        let jc = cholesky_with_jitter(&k_y, 0.0, "data covariance")?;
        let alpha = jc.chol.solve(&self.y);
        let half_log_det: f64 = (0..n).map(|i| jc.chol.l_dirty()[(i, i)].ln()).sum();
        let data_term = -0.5 * self.y.dot(&alpha) - half_log_det - 0.5 * n as f64 * LN_2PI;
        Ok(self.assemble(data_term, priors))
    }

    /// Value and gradient from one shared factorization of `K_y`.
    pub fn value_and_grad(&self, state: &LatentState) -> Result<(MllValue, LatentGradient)> {
        self.check_state(state)?;
        let n = self.n();

        let mut priors = [0.0; 3];
        let mut prior_grads: [Option<DVector<f64>>; 3] = [None, None, None];
        for (slot, kind) in LATENT_KINDS.iter().enumerate() {
            let (v, g) = self.prior_term(*kind, state.component(*kind))?;
            priors[slot] = v;
            prior_grads[slot] = Some(g);
        }

        if !self.data_term_enabled {
            let value = self.assemble(0.0, priors);
            let [ge, gs, go] = prior_grads;
            let grad = LatentGradient {
                g_ell: ge.unwrap(),
                g_sigma: gs.unwrap(),
                g_omega: go.unwrap(),
            };
            return Ok((value, grad));
        }

        let ell = state.ell.natural_values(n);
        let sigma = state.sigma.natural_values(n);
        let omega = state.omega.natural_values(n);
        let k_f = nonstationary_kernel(&self.x, &self.x, &ell, &ell, &sigma, &sigma)?.entries;
        let mut k_y = k_f.clone();
        for i in 0..n {
            k_y[(i, i)] += omega[i] * omega[i];
        }
        let jc = cholesky_with_jitter(&k_y, 0.0, "data covariance")?;
        let alpha = jc.chol.solve(&self.y);
        let half_log_det: f64 = (0..n).map(|i| jc.chol.l_dirty()[(i, i)].ln()).sum();
        let data_term = -0.5 * self.y.dot(&alpha) - half_log_det - 0.5 * n as f64 * LN_2PI;
        let value = self.assemble(data_term, priors);

        // A = alpha alpha^T - K_y^{-1}, with the inverse obtained by
        // solving against the identity through the Cholesky factor.
        let mut a = jc.chol.solve(&DMatrix::identity(n, n));
        a.neg_mut();
        a.ger(1.0, &alpha, &alpha, 1.0);

        // d(data)/d(log ell_i) = sum_j A_ij * [plus row i]_j
        let data_g_ell = DVector::from_fn(n, |i, _| {
            let row = dk_dlog_lengthscale(&self.x, &ell, &sigma, i)
                .expect("validated latents")
                .row;
            (0..n).map(|j| a[(i, j)] * row[j]).sum()
        });
        // d(data)/d(log sigma_i) = [A K_f]_ii
        let data_g_sigma = DVector::from_fn(n, |i, _| (0..n).map(|j| a[(i, j)] * k_f[(i, j)]).sum());
        // d(data)/d(log omega_i) = A_ii omega_i^2
        let data_g_omega = DVector::from_fn(n, |i, _| a[(i, i)] * omega[i] * omega[i]);

        let collapse = |kind: LatentKind, data_g: DVector<f64>| -> DVector<f64> {
            if self.flags.is_nonstat(kind) {
                data_g
            } else {
                // a shared scalar moves every entry at once
                DVector::from_element(1, data_g.sum())
            }
        };
        let [ge, gs, go] = prior_grads;
        let grad = LatentGradient {
            g_ell: collapse(LatentKind::Lengthscale, data_g_ell) + ge.unwrap(),
            g_sigma: collapse(LatentKind::SignalSd, data_g_sigma) + gs.unwrap(),
            g_omega: collapse(LatentKind::NoiseSd, data_g_omega) + go.unwrap(),
        };
        Ok((value, grad))
    }

    pub fn gradient(&self, state: &LatentState) -> Result<LatentGradient> {
        Ok(self.value_and_grad(state)?.1)
    }

    /// Unpack a flat whitened vector into a natural-frame state.
    pub fn state_from_whitened_flat(&self, flat: &DVector<f64>) -> Result<LatentState> {
        let w = LatentState::from_flat(flat, &self.flags, self.n(), Frame::Whitened)?;
        unwhiten(&w, &self.factors, &self.theta)
    }

    /// Pack a natural-frame state into flat whitened coordinates.
    pub fn whitened_flat_from_state(&self, state: &LatentState) -> Result<DVector<f64>> {
        Ok(whiten(state, &self.factors, &self.theta)?.to_flat())
    }

    /// Objective value at flat whitened coordinates.
    pub fn whitened_value(&self, flat: &DVector<f64>) -> Result<f64> {
        let state = self.state_from_whitened_flat(flat)?;
        Ok(self.mll(&state)?.total)
    }

    /// Value and gradient in flat whitened coordinates; the gradient of
    /// each nonstationary block is `L^T` times the natural gradient.
    pub fn whitened_value_and_grad(&self, flat: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let state = self.state_from_whitened_flat(flat)?;
        let (value, grad) = self.value_and_grad(&state)?;
        let mut parts = Vec::with_capacity(3);
        for kind in LATENT_KINDS {
            parts.push(whitened_gradient(grad.component(kind), &self.factors, kind)?);
        }
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let mut out = DVector::zeros(total);
        let mut at = 0;
        for p in parts {
            out.rows_mut(at, p.len()).copy_from(&p);
            at += p.len();
        }
        Ok((value.total, out))
    }
}

/// One-shot marginal log likelihood; builds the prior factors internally.
/// Prefer [`Objective`] when evaluating repeatedly at the same inputs.
pub fn mll(
    y: &DVector<f64>,
    x: &DVector<f64>,
    state: &LatentState,
    theta: &Hyperparams,
    flags: &VariantFlags,
) -> Result<MllValue> {
    Objective::new(y, x, theta, flags)?.mll(state)
}

/// One-shot gradient; see [`mll`].
pub fn mll_gradient(
    y: &DVector<f64>,
    x: &DVector<f64>,
    state: &LatentState,
    theta: &Hyperparams,
    flags: &VariantFlags,
) -> Result<LatentGradient> {
    Objective::new(y, x, theta, flags)?.gradient(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::se_kernel;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Independent multivariate normal log density via LU decomposition;
    /// deliberately avoids the Cholesky path used by the implementation.
    fn mvn_logpdf_lu(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let n = y.len() as f64;
        let lu = cov.clone().lu();
        let det = lu.determinant();
        let centered = y - mean;
        let solved = lu.solve(&centered).expect("nonsingular covariance");
        -0.5 * centered.dot(&solved) - 0.5 * det.ln() - 0.5 * n * LN_2PI
    }

    /// Random instance with latents drawn from (a scaled-down version of)
    /// their own priors, so states are plausible and well conditioned.
    fn random_instance(
        n: usize,
        flags: VariantFlags,
        seed: u64,
    ) -> (DVector<f64>, DVector<f64>, Hyperparams, LatentState) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.7);
        let theta = Hyperparams::defaults();
        let factors = crate::model::build_prior_factors(&x, &theta).unwrap();
        let mut draw = |kind: LatentKind| {
            let center = theta.mu(kind);
            if flags.is_nonstat(kind) {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let v = &factors.factor(kind).l * z * 0.6
                    + DVector::from_element(n, center);
                Latent::Field(v)
            } else {
                Latent::Scalar(center + rng.sample::<f64, _>(StandardNormal) * 0.3)
            }
        };
        let state = LatentState {
            ell: draw(LatentKind::Lengthscale),
            sigma: draw(LatentKind::SignalSd),
            omega: draw(LatentKind::NoiseSd),
            frame: Frame::Natural,
        };
        (y, x, theta, state)
    }

    /// Central finite difference of the total MLL along natural flat
    /// coordinates: the shared oracle for every gradient test.
    fn fd_gradient(obj: &Objective, state: &LatentState, h: f64) -> DVector<f64> {
        let flat = state.to_flat();
        let n = obj.n();
        DVector::from_fn(flat.len(), |i, _| {
            let mut plus = flat.clone();
            plus[i] += h;
            let mut minus = flat.clone();
            minus[i] -= h;
            let sp = LatentState::from_flat(&plus, obj.flags(), n, Frame::Natural).unwrap();
            let sm = LatentState::from_flat(&minus, obj.flags(), n, Frame::Natural).unwrap();
            (obj.mll(&sp).unwrap().total - obj.mll(&sm).unwrap().total) / (2.0 * h)
        })
    }

    fn assert_grad_close(analytic: &DVector<f64>, fd: &DVector<f64>, label: &str) {
        for i in 0..analytic.len() {
            // relative tolerance 1e-5, absolute floor 1e-8
            let tol = (1e-5 * fd[i].abs()).max(1e-8);
            assert!(
                (analytic[i] - fd[i]).abs() <= tol,
                "{label}: entry {i} analytic {} vs fd {}",
                analytic[i],
                fd[i]
            );
        }
    }

    #[test]
    fn scalar_data_term() {
        // one point, unit latents: K_y = 2, y = 0
        let y = DVector::from_column_slice(&[0.0]);
        let x = DVector::from_column_slice(&[0.5]);
        let theta =
            Hyperparams::from_original_means(1.0, 1.0, 1.0, (1.0, 1.0, 1.0), (0.1, 0.1, 0.2))
                .unwrap();
        let flags = VariantFlags::stationary();
        let state = LatentState::at_prior_mean(&theta, &flags, 1);
        let value = mll(&y, &x, &state, &theta, &flags).unwrap();
        assert_relative_eq!(value.data_term, -0.5 * (2.0 * std::f64::consts::TAU).ln(), epsilon = 1e-12);
        let sum = value.data_term + value.prior_ell + value.prior_sigma + value.prior_omega;
        assert!((value.total - sum).abs() <= 1e-10);
    }

    #[test]
    fn zero_outputs_leave_only_log_det() {
        let (_, x, theta, state) = random_instance(8, VariantFlags::fully_nonstationary(), 9);
        let y = DVector::zeros(8);
        let flags = VariantFlags::fully_nonstationary();
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let value = obj.mll(&state).unwrap();

        // direct: -0.5 log det(2 pi K_y)
        let n = 8;
        let ell = state.ell.natural_values(n);
        let sigma = state.sigma.natural_values(n);
        let omega = state.omega.natural_values(n);
        let mut k_y = nonstationary_kernel(&x, &x, &ell, &ell, &sigma, &sigma).unwrap().entries;
        for i in 0..n {
            k_y[(i, i)] += omega[i] * omega[i];
        }
        let expected = -0.5 * (k_y.lu().determinant().ln() + n as f64 * LN_2PI);
        assert_relative_eq!(value.data_term, expected, epsilon = 1e-9);
    }

    #[test]
    fn matches_independent_dense_evaluation() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, state) = random_instance(15, flags, 21);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let value = obj.mll(&state).unwrap();

        let n = 15;
        let ell = state.ell.natural_values(n);
        let sigma = state.sigma.natural_values(n);
        let omega = state.omega.natural_values(n);
        let mut k_y = nonstationary_kernel(&x, &x, &ell, &ell, &sigma, &sigma).unwrap().entries;
        for i in 0..n {
            k_y[(i, i)] += omega[i] * omega[i];
        }
        let mut expected = mvn_logpdf_lu(&y, &DVector::zeros(n), &k_y);
        for kind in LATENT_KINDS {
            let cf = obj.factors().factor(kind);
            let mut prior = se_kernel(&x, &x, theta.alpha(kind), theta.beta(kind)).unwrap().entries;
            for i in 0..n {
                prior[(i, i)] += cf.jitter;
            }
            let v = state.component(kind).log_values(n);
            expected += mvn_logpdf_lu(&v, &DVector::from_element(n, theta.mu(kind)), &prior);
        }
        assert_relative_eq!(value.total, expected, epsilon = 1e-8, max_relative = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences_fully_nonstationary() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, state) = random_instance(12, flags, 33);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let (_, grad) = obj.value_and_grad(&state).unwrap();
        let fd = fd_gradient(&obj, &state, 1e-6);
        assert_grad_close(&grad.to_flat(), &fd, "fully nonstationary");
    }

    #[test]
    fn gradient_matches_finite_differences_all_stationary() {
        let flags = VariantFlags::stationary();
        let (y, x, theta, state) = random_instance(10, flags, 5);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let (_, grad) = obj.value_and_grad(&state).unwrap();
        assert_eq!(grad.to_flat().len(), 3);
        let fd = fd_gradient(&obj, &state, 1e-6);
        assert_grad_close(&grad.to_flat(), &fd, "all stationary");
    }

    #[test]
    fn gradient_matches_finite_differences_every_variant() {
        for (k, flags) in VariantFlags::all_combinations().into_iter().enumerate() {
            let (y, x, theta, state) = random_instance(7, flags, 100 + k as u64);
            let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
            let (_, grad) = obj.value_and_grad(&state).unwrap();
            let fd = fd_gradient(&obj, &state, 1e-6);
            assert_grad_close(&grad.to_flat(), &fd, &flags.name());
        }
    }

    #[test]
    fn whitened_gradient_matches_finite_differences() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, state) = random_instance(10, flags, 77);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let w = obj.whitened_flat_from_state(&state).unwrap();
        let (_, grad_w) = obj.whitened_value_and_grad(&w).unwrap();
        let h = 1e-6;
        for i in 0..w.len() {
            let mut plus = w.clone();
            plus[i] += h;
            let mut minus = w.clone();
            minus[i] -= h;
            let fd = (obj.whitened_value(&plus).unwrap() - obj.whitened_value(&minus).unwrap())
                / (2.0 * h);
            let tol = (1e-5 * fd.abs()).max(1e-8);
            assert!(
                (grad_w[i] - fd).abs() <= tol,
                "whitened entry {i}: analytic {} vs fd {}",
                grad_w[i],
                fd
            );
        }
    }

    #[test]
    fn mll_invariant_under_permutation() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, state) = random_instance(9, flags, 13);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let base = obj.mll(&state).unwrap().total;

        let mut order: Vec<usize> = (0..9).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        order.shuffle(&mut rng);
        let perm = |v: &DVector<f64>| DVector::from_fn(9, |i, _| v[order[i]]);
        let yp = perm(&y);
        let xp = perm(&x);
        let statep = LatentState {
            ell: Latent::Field(perm(&state.ell.log_values(9))),
            sigma: Latent::Field(perm(&state.sigma.log_values(9))),
            omega: Latent::Field(perm(&state.omega.log_values(9))),
            frame: Frame::Natural,
        };
        let permuted = mll(&yp, &xp, &statep, &theta, &flags).unwrap().total;
        assert_relative_eq!(base, permuted, epsilon = 1e-8, max_relative = 1e-9);
    }

    #[test]
    fn prior_terms_peak_at_prior_mean() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, _) = random_instance(8, flags, 55);
        let obj = Objective::new(&y, &x, &theta, &flags).unwrap();
        let at_mean = LatentState::at_prior_mean(&theta, &flags, 8);
        let peak = obj.mll(&at_mean).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        for _ in 0..20 {
            let mut shifted = at_mean.clone();
            shifted.ell = Latent::Field(DVector::from_fn(8, |_, _| {
                theta.mu_ell + rng.sample::<f64, _>(StandardNormal) * 0.5
            }));
            let v = obj.mll(&shifted).unwrap();
            assert!(v.prior_ell <= peak.prior_ell);
        }
    }

    #[test]
    fn prior_only_ignores_data() {
        let flags = VariantFlags::fully_nonstationary();
        let (y, x, theta, state) = random_instance(6, flags, 71);
        let prior_obj = Objective::prior_only(&y, &x, &theta, &flags).unwrap();
        let v = prior_obj.mll(&state).unwrap();
        assert_eq!(v.data_term, 0.0);
        let full = Objective::new(&y, &x, &theta, &flags).unwrap().mll(&state).unwrap();
        assert_relative_eq!(
            v.total,
            full.prior_ell + full.prior_sigma + full.prior_omega,
            epsilon = 1e-12
        );
    }
}
