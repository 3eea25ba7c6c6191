//! Covariance functions.
//!
//! Two kernels live here: the input-dependent generalisation of the squared
//! exponential, where the signal deviation `sigma(x)` and the lengthscale
//! `ell(x)` vary with the input, and the plain squared exponential used as
//! the prior covariance of the latent log functions. The derivative of the
//! data covariance with respect to one log-lengthscale entry is also
//! provided; it is nonzero only on one row and the matching column.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{NsgpError, Result};

/// Relative jitter added to every square kernel matrix before Cholesky.
pub const JITTER_REL: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_REL_MAX: f64 = 1e-2;

/// A kernel matrix together with the inputs it was evaluated over.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub entries: DMatrix<f64>,
    pub row_inputs: DVector<f64>,
    pub col_inputs: DVector<f64>,
}

impl KernelMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }
}

/// Derivative of the data covariance with respect to one log-lengthscale
/// entry. Only row `index` and column `index` of the dense expansion are
/// nonzero, so only that row is stored.
#[derive(Debug, Clone)]
pub struct DerivativePlusMatrix {
    pub index: usize,
    pub row: DVector<f64>,
}

impl DerivativePlusMatrix {
    /// Dense n-by-n expansion; useful for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.row.len();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            out[(self.index, j)] = self.row[j];
            out[(j, self.index)] = self.row[j];
        }
        out
    }
}

fn check_positive(name: &str, v: &DVector<f64>) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(NsgpError::Domain(format!(
                "{name}[{i}] = {x} must be strictly positive and finite"
            )));
        }
    }
    Ok(())
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(NsgpError::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

/// Input-dependent squared exponential covariance.
///
/// Entry (i, j) is
/// `sigma_i sigma_j sqrt(2 l_i l_j / (l_i^2 + l_j^2)) exp(-(x_i - x_j)^2 / (l_i^2 + l_j^2))`
/// with the row-side latents evaluated at `x_rows` and the column-side
/// latents at `x_cols`. With constant latents this reduces to the standard
/// squared exponential.
pub fn nonstationary_kernel(
    x_rows: &DVector<f64>,
    x_cols: &DVector<f64>,
    ell_rows: &DVector<f64>,
    ell_cols: &DVector<f64>,
    sigma_rows: &DVector<f64>,
    sigma_cols: &DVector<f64>,
) -> Result<KernelMatrix> {
    check_len("nonstationary_kernel row lengthscales", x_rows.len(), ell_rows.len())?;
    check_len("nonstationary_kernel col lengthscales", x_cols.len(), ell_cols.len())?;
    check_len("nonstationary_kernel row signal sds", x_rows.len(), sigma_rows.len())?;
    check_len("nonstationary_kernel col signal sds", x_cols.len(), sigma_cols.len())?;
    check_positive("lengthscale", ell_rows)?;
    check_positive("lengthscale", ell_cols)?;
    check_positive("signal sd", sigma_rows)?;
    check_positive("signal sd", sigma_cols)?;

    let entries = DMatrix::from_fn(x_rows.len(), x_cols.len(), |i, j| {
        let li = ell_rows[i];
        let lj = ell_cols[j];
        let sum_sq = li * li + lj * lj;
        let d = x_rows[i] - x_cols[j];
        sigma_rows[i] * sigma_cols[j] * (2.0 * li * lj / sum_sq).sqrt() * (-d * d / sum_sq).exp()
    });
    Ok(KernelMatrix {
        entries,
        row_inputs: x_rows.clone(),
        col_inputs: x_cols.clone(),
    })
}

/// Standard squared exponential covariance with scale `alpha` and
/// lengthscale `beta`: entry (i, j) is `alpha^2 exp(-(x_i - x_j)^2 / (2 beta^2))`.
pub fn se_kernel(
    x_rows: &DVector<f64>,
    x_cols: &DVector<f64>,
    alpha: f64,
    beta: f64,
) -> Result<KernelMatrix> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(NsgpError::Domain(format!("alpha = {alpha} must be strictly positive")));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(NsgpError::Domain(format!("beta = {beta} must be strictly positive")));
    }
    let a2 = alpha * alpha;
    let inv_two_b2 = 1.0 / (2.0 * beta * beta);
    let entries = DMatrix::from_fn(x_rows.len(), x_cols.len(), |i, j| {
        let d = x_rows[i] - x_cols[j];
        a2 * (-d * d * inv_two_b2).exp()
    });
    Ok(KernelMatrix {
        entries,
        row_inputs: x_rows.clone(),
        col_inputs: x_cols.clone(),
    })
}

/// Derivative of the data covariance with respect to `log(ell_i)`.
///
/// Derived directly from the kernel: for j != i the (i, j) entry is
/// `K_ij (1/2 - l_i^2 / L + 2 d^2 l_i^2 / L^2)` with `L = l_i^2 + l_j^2`
/// and `d = x_i - x_j`; the (i, i) entry is zero because the diagonal of
/// the kernel does not depend on the lengthscale.
pub fn dk_dlog_lengthscale(
    x: &DVector<f64>,
    ell: &DVector<f64>,
    sigma: &DVector<f64>,
    index: usize,
) -> Result<DerivativePlusMatrix> {
    let n = x.len();
    check_len("dk_dlog_lengthscale lengthscales", n, ell.len())?;
    check_len("dk_dlog_lengthscale signal sds", n, sigma.len())?;
    check_positive("lengthscale", ell)?;
    check_positive("signal sd", sigma)?;
    if index >= n {
        return Err(NsgpError::IndexOutOfRange { index, len: n });
    }

    let li = ell[index];
    let li2 = li * li;
    let row = DVector::from_fn(n, |j, _| {
        if j == index {
            return 0.0;
        }
        let lj = ell[j];
        let sum_sq = li2 + lj * lj;
        let d = x[index] - x[j];
        let k_ij = sigma[index] * sigma[j] * (2.0 * li * lj / sum_sq).sqrt()
            * (-d * d / sum_sq).exp();
        k_ij * (0.5 - li2 / sum_sq + 2.0 * d * d * li2 / (sum_sq * sum_sq))
    });
    Ok(DerivativePlusMatrix { index, row })
}

/// Result of a jittered Cholesky factorization.
pub struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    /// Absolute jitter that was added to the diagonal.
    pub jitter: f64,
}

/// Cholesky with the standard escalating-jitter policy: add
/// `rel * mean(diag)` to the diagonal starting at `initial_rel`, multiply
/// the jitter by 10 on failure, and give up past `JITTER_REL_MAX`.
pub fn cholesky_with_jitter(
    matrix: &DMatrix<f64>,
    initial_rel: f64,
    context: &str,
) -> Result<JitteredCholesky> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(NsgpError::Numerical(format!("{context}: empty matrix")));
    }
    let mean_diag = matrix.diagonal().sum() / n as f64;
    if !mean_diag.is_finite() {
        return Err(NsgpError::Numerical(format!(
            "{context}: non-finite diagonal (mean {mean_diag})"
        )));
    }

    let mut rel = initial_rel;
    loop {
        let jitter = rel * mean_diag;
        let mut m = matrix.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(JitteredCholesky { chol, jitter });
        }
        rel = if rel == 0.0 { JITTER_REL } else { rel * 10.0 };
        if rel > JITTER_REL_MAX {
            return Err(NsgpError::Numerical(format!(
                "{context}: Cholesky failed even with relative jitter {JITTER_REL_MAX}"
            )));
        }
    }
}

/// Jittered Cholesky for pure kernel Gram matrices; always starts at the
/// baseline jitter because these are often numerically rank-deficient.
pub fn cholesky_kernel(matrix: &DMatrix<f64>, context: &str) -> Result<JitteredCholesky> {
    cholesky_with_jitter(matrix, JITTER_REL, context)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vec_of(vals: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(vals)
    }

    /// Central finite difference of the (row, col) kernel entry with
    /// respect to log(ell[which]), used as the independent oracle for
    /// `dk_dlog_lengthscale`.
    fn fd_entry(
        x: &DVector<f64>,
        ell: &DVector<f64>,
        sigma: &DVector<f64>,
        row: usize,
        col: usize,
        which: usize,
        h: f64,
    ) -> f64 {
        let eval = |log_shift: f64| {
            let mut e = ell.clone();
            e[which] *= log_shift.exp();
            let k = nonstationary_kernel(x, x, &e, &e, sigma, sigma).unwrap();
            k.entries[(row, col)]
        };
        (eval(h) - eval(-h)) / (2.0 * h)
    }

    #[test]
    fn diagonal_is_signal_variance() {
        let x = vec_of(&[0.3, 1.7, -2.0]);
        let ell = vec_of(&[0.5, 1.2, 3.0]);
        let sigma = vec_of(&[0.7, 1.1, 0.2]);
        let k = nonstationary_kernel(&x, &x, &ell, &ell, &sigma, &sigma).unwrap();
        for i in 0..3 {
            assert_relative_eq!(k.entries[(i, i)], sigma[i] * sigma[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn hand_evaluated_entry() {
        // x=0, x'=1, ell(0)=1, ell(1)=2, sigma=1 everywhere:
        // sqrt(4/5) * exp(-1/5)
        let k = nonstationary_kernel(
            &vec_of(&[0.0]),
            &vec_of(&[1.0]),
            &vec_of(&[1.0]),
            &vec_of(&[2.0]),
            &vec_of(&[1.0]),
            &vec_of(&[1.0]),
        )
        .unwrap();
        let expected = (0.8f64).sqrt() * (-0.2f64).exp();
        assert_relative_eq!(k.entries[(0, 0)], expected, epsilon = 1e-14);
        assert_relative_eq!(k.entries[(0, 0)], 0.732295, epsilon = 1e-6);
    }

    #[test]
    fn constant_latents_reduce_to_se() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 17;
        let x = DVector::from_fn(n, |_, _| rng.random::<f64>() * 3.0 - 1.0);
        let (ell, sigma) = (0.37, 1.9);
        let ellv = DVector::from_element(n, ell);
        let sigv = DVector::from_element(n, sigma);
        let ns = nonstationary_kernel(&x, &x, &ellv, &ellv, &sigv, &sigv).unwrap();
        let se = se_kernel(&x, &x, sigma, ell).unwrap();
        let max_dev = (ns.entries - se.entries).abs().max();
        assert!(max_dev <= 1e-12, "max deviation {max_dev}");
    }

    #[test]
    fn se_kernel_values() {
        let k = se_kernel(&vec_of(&[0.0]), &vec_of(&[0.0]), 1.3, 0.5).unwrap();
        assert_relative_eq!(k.entries[(0, 0)], 1.69, epsilon = 1e-14);

        let k = se_kernel(&vec_of(&[0.0]), &vec_of(&[0.1]), 1.0, 0.1).unwrap();
        assert_relative_eq!(k.entries[(0, 0)], (-0.5f64).exp(), epsilon = 1e-14);

        // monotone decay: beyond ten lengthscales the entry is negligible
        let k = se_kernel(&vec_of(&[0.0]), &vec_of(&[1.5]), 2.0, 0.1).unwrap();
        assert!(k.entries[(0, 0)] < 4.0 * (-50.0f64).exp());
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = vec_of(&[0.0, 1.0]);
        let good = vec_of(&[1.0, 1.0]);
        let bad = vec_of(&[1.0, -0.5]);
        assert!(matches!(
            nonstationary_kernel(&x, &x, &bad, &good, &good, &good),
            Err(NsgpError::Domain(_))
        ));
        assert!(matches!(
            nonstationary_kernel(&x, &x, &vec_of(&[1.0]), &good, &good, &good),
            Err(NsgpError::Dimension { .. })
        ));
        assert!(matches!(se_kernel(&x, &x, 0.0, 1.0), Err(NsgpError::Domain(_))));
        assert!(matches!(se_kernel(&x, &x, 1.0, -1.0), Err(NsgpError::Domain(_))));
        assert!(matches!(
            dk_dlog_lengthscale(&x, &good, &good, 2),
            Err(NsgpError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn exchange_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xa = DVector::from_fn(4, |_, _| rng.random::<f64>());
        let xb = DVector::from_fn(6, |_, _| rng.random::<f64>());
        let la = DVector::from_fn(4, |_, _| rng.random::<f64>() + 0.1);
        let lb = DVector::from_fn(6, |_, _| rng.random::<f64>() + 0.1);
        let sa = DVector::from_fn(4, |_, _| rng.random::<f64>() + 0.1);
        let sb = DVector::from_fn(6, |_, _| rng.random::<f64>() + 0.1);
        let kab = nonstationary_kernel(&xa, &xb, &la, &lb, &sa, &sb).unwrap();
        let kba = nonstationary_kernel(&xb, &xa, &lb, &la, &sb, &sa).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                assert_relative_eq!(kab.entries[(i, j)], kba.entries[(j, i)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn plus_matrix_single_point() {
        let x = vec_of(&[0.4]);
        let ell = vec_of(&[0.9]);
        let sigma = vec_of(&[1.3]);
        let d = dk_dlog_lengthscale(&x, &ell, &sigma, 0).unwrap();
        let fd = fd_entry(&x, &ell, &sigma, 0, 0, 0, 1e-6);
        assert!((d.row[0] - fd).abs() <= 1e-8, "analytic {} vs fd {}", d.row[0], fd);
    }

    #[test]
    fn plus_matrix_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..100 {
            let n = rng.random_range(2..8usize);
            let x = DVector::from_fn(n, |_, _| rng.random::<f64>());
            let ell = DVector::from_fn(n, |_, _| (rng.random::<f64>() - 0.5).exp() * 0.5);
            let sigma = DVector::from_fn(n, |_, _| (rng.random::<f64>() - 0.5).exp());
            let i = rng.random_range(0..n);
            let d = dk_dlog_lengthscale(&x, &ell, &sigma, i).unwrap();
            let dense = d.to_dense();
            for r in 0..n {
                for c in 0..n {
                    // symmetric and zero off the plus shape
                    assert_eq!(dense[(r, c)], dense[(c, r)]);
                    if r != i && c != i {
                        assert_eq!(dense[(r, c)], 0.0);
                    }
                }
            }
            // the (i,i) entry: total derivative of sigma_i^2 is zero
            assert_eq!(dense[(i, i)], 0.0);
            for j in 0..n {
                let fd = if j == i {
                    // perturbing ell_i moves both sides of the diagonal entry
                    fd_entry(&x, &ell, &sigma, i, i, i, 1e-6)
                } else {
                    fd_entry(&x, &ell, &sigma, i, j, i, 1e-6)
                };
                let got = dense[(i, j)];
                let tol = 1e-5 * fd.abs().max(1e-8);
                assert!(
                    (got - fd).abs() <= tol,
                    "trial {trial}: entry ({i},{j}) analytic {got} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn jitter_recovers_rank_deficient() {
        // identical inputs make the SE Gram exactly rank one
        let x = vec_of(&[0.5, 0.5]);
        let k = se_kernel(&x, &x, 1.0, 0.1).unwrap();
        let jc = cholesky_kernel(&k.entries, "test").unwrap();
        assert!(jc.jitter > 0.0);
        let l = jc.chol.l();
        let rebuilt = &l * l.transpose();
        let mut target = k.entries.clone();
        for i in 0..2 {
            target[(i, i)] += jc.jitter;
        }
        assert!((rebuilt - target).abs().max() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn kernel_is_positive_semidefinite(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(1..=50usize);
            let x = DVector::from_fn(n, |_, _| rng.random::<f64>());
            // log-normal latents
            let ell = DVector::from_fn(n, |_, _| {
                (rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.5).exp() * 0.3
            });
            let sigma = DVector::from_fn(n, |_, _| {
                (rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.5).exp()
            });
            let k = nonstationary_kernel(&x, &x, &ell, &ell, &sigma, &sigma).unwrap();
            // symmetry
            let asym = (&k.entries - k.entries.transpose()).abs().max();
            prop_assert!(asym <= 1e-12);
            let eig = k.entries.clone().symmetric_eigenvalues();
            let max = eig.max();
            let min = eig.min();
            prop_assert!(min >= -1e-10 * max.max(1e-300), "min {} max {}", min, max);
        }
    }
}
