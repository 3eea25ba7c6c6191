//! Small sample-quality utilities: standard normal CDF and a one-sample
//! Kolmogorov-Smirnov test against N(0, 1).

/// Error function, Abramowitz & Stegun 7.1.26 (absolute error < 1.5e-7).
pub fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One-sample KS statistic against the standard normal.
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &z) in sorted.iter().enumerate() {
        let cdf = normal_cdf(z);
        let hi = (i as f64 + 1.0) / n - cdf;
        let lo = cdf - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    d
}

/// Asymptotic p-value of the KS statistic (Kolmogorov distribution with
/// the Stephens small-sample correction).
pub fn ks_pvalue(statistic: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Convenience: KS test of `samples` against N(0, 1); returns (D, p).
pub fn ks_test_standard_normal(samples: &[f64]) -> (f64, f64) {
    let d = ks_statistic(samples);
    (d, ks_pvalue(d, samples.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.9750021).abs() < 1e-6);
        assert!((normal_cdf(-1.0) - 0.1586553).abs() < 1e-6);
    }

    #[test]
    fn ks_accepts_true_normals_and_rejects_shifted() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let (_, p) = ks_test_standard_normal(&normal);
        assert!(p > 0.01, "true normal rejected (p = {p})");

        let shifted: Vec<f64> = normal.iter().map(|z| z + 0.2).collect();
        let (_, p) = ks_test_standard_normal(&shifted);
        assert!(p < 0.01, "shifted sample accepted (p = {p})");
    }
}
