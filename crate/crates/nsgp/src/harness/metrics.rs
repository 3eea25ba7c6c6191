//! Test-set metrics: mean squared error of the predictive mean and the
//! negative log predictive density of held-out observations under the
//! predictive mixture (with the target noise variance added, since
//! observations rather than latent values are scored).

use nalgebra::DVector;

use crate::error::{NsgpError, Result};
use crate::predict::PredictiveMixture;

/// Mean squared error between observations and a predictive mean.
pub fn mse(y_test: &DVector<f64>, predictive_mean: &DVector<f64>) -> Result<f64> {
    if y_test.len() != predictive_mean.len() {
        return Err(NsgpError::Dimension {
            context: "mse",
            expected: y_test.len(),
            got: predictive_mean.len(),
        });
    }
    if y_test.is_empty() {
        return Err(NsgpError::Empty("mse: no test points"));
    }
    Ok((y_test - predictive_mean).norm_squared() / y_test.len() as f64)
}

const LN_2PI: f64 = 1.8378770664093453;

fn log_sum_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Average negative log density of each observation under the pointwise
/// mixture, each component widened by its own target noise variance.
pub fn nlpd(y_test: &DVector<f64>, mixture: &PredictiveMixture) -> Result<f64> {
    if mixture.is_empty() {
        return Err(NsgpError::Empty("nlpd: empty mixture"));
    }
    let dim = mixture.components[0].mean.len();
    if y_test.len() != dim {
        return Err(NsgpError::Dimension {
            context: "nlpd",
            expected: dim,
            got: y_test.len(),
        });
    }
    if y_test.is_empty() {
        return Err(NsgpError::Empty("nlpd: no test points"));
    }

    let log_weight = -(mixture.components.len() as f64).ln();
    let mut total = 0.0;
    let mut log_terms = Vec::with_capacity(mixture.components.len());
    for i in 0..dim {
        log_terms.clear();
        for c in &mixture.components {
            let var = c.cov[(i, i)].max(0.0) + c.noise_sd[i] * c.noise_sd[i];
            if !(var > 0.0) {
                return Err(NsgpError::Numerical(format!(
                    "nlpd: nonpositive predictive variance {var} at test point {i}"
                )));
            }
            let dev = y_test[i] - c.mean[i];
            log_terms.push(log_weight - 0.5 * (dev * dev / var + var.ln() + LN_2PI));
        }
        total += log_sum_exp(&log_terms);
    }
    Ok(-total / dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::PredictiveComponent;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_scores_zero_mse() {
        let y = DVector::from_column_slice(&[0.2, -0.6, 1.0]);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        assert!(mse(&y, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn unit_gaussian_at_its_mean() {
        let y = DVector::from_column_slice(&[0.5, 0.5]);
        let mix = PredictiveMixture::uniform(vec![PredictiveComponent {
            mean: y.clone(),
            cov: DMatrix::identity(2, 2),
            noise_sd: DVector::zeros(2),
        }])
        .unwrap();
        assert_relative_eq!(nlpd(&y, &mix).unwrap(), 0.5 * LN_2PI, epsilon = 1e-12);
    }

    #[test]
    fn two_component_mixture_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let means = [0.3, -0.4];
        let sds = [0.5, 0.9];
        let y = DVector::from_column_slice(&[0.1]);
        let mix = PredictiveMixture::uniform(
            means
                .iter()
                .zip(&sds)
                .map(|(&m, &s)| PredictiveComponent {
                    mean: DVector::from_element(1, m),
                    cov: DMatrix::from_element(1, 1, s * s),
                    noise_sd: DVector::zeros(1),
                })
                .collect(),
        )
        .unwrap();
        let got = nlpd(&y, &mix).unwrap();

        // Monte Carlo oracle: the mixture density at y is the expectation
        // of the component density at y over a uniformly drawn component
        let draws = 2_000_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let k = rng.random_range(0..2);
            let dev: f64 = y[0] - means[k];
            let var = sds[k] * sds[k];
            acc += (-0.5 * (dev * dev / var + var.ln() + LN_2PI)).exp();
        }
        let mc_density = acc / draws as f64;
        assert!(
            (got - (-mc_density.ln())).abs() <= 1e-3,
            "nlpd {got} vs mc {}",
            -mc_density.ln()
        );
    }
}
