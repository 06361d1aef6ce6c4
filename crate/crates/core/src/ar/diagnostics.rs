use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::chi2_quantile;

/// Whiteness and normality checks on a residual sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    /// `ρ̂_k` for `k = 1 … max_lag`.
    pub autocorrelations: Vec<f64>,
    /// Box–Pierce `N′·Σρ̂_k²`.
    pub whiteness_statistic: f64,
    pub whiteness_threshold: f64,
    pub whiteness_pass: bool,
    /// Jarque–Bera `N′/6·(S² + (K−3)²/4)`.
    pub normality_statistic: f64,
    pub normality_threshold: f64,
    pub normality_pass: bool,
}

/// Portmanteau whiteness test against `χ²_{1−α}(max_lag)` and
/// skewness–kurtosis normality test against `χ²_{1−α}(2)`.
pub fn residual_diagnostics(e: &[f64], max_lag: usize, alpha_w: f64) -> Result<ResidualDiagnostics> {
    let n = e.len();
    if max_lag == 0 || n <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "need 1 ≤ max_lag < {n}, got {max_lag}"
        )));
    }
    if !(alpha_w > 0.0 && alpha_w < 1.0) {
        return Err(Error::InvalidArgument("alpha_w must lie in (0, 1)".into()));
    }
    let nf = n as f64;
    let mean = e.iter().sum::<f64>() / nf;
    let centred: Vec<f64> = e.iter().map(|v| v - mean).collect();
    let m2 = centred.iter().map(|v| v * v).sum::<f64>();
    if !(m2 > 0.0) || m2 <= 1e-28 * e.iter().map(|v| v * v).sum::<f64>() {
        return Err(Error::Numerical("residuals are constant".into()));
    }
    let autocorrelations: Vec<f64> = (1..=max_lag)
        .map(|k| {
            let c: f64 = centred[..n - k]
                .iter()
                .zip(&centred[k..])
                .map(|(a, b)| a * b)
                .sum();
            c / m2
        })
        .collect();
    let whiteness_statistic = nf * autocorrelations.iter().map(|r| r * r).sum::<f64>();
    let whiteness_threshold = chi2_quantile(1.0 - alpha_w, max_lag as u32)?;

    let var = m2 / nf;
    let skew = centred.iter().map(|v| v.powi(3)).sum::<f64>() / nf / var.powf(1.5);
    let kurt = centred.iter().map(|v| v.powi(4)).sum::<f64>() / nf / (var * var);
    let normality_statistic = nf / 6.0 * (skew * skew + 0.25 * (kurt - 3.0).powi(2));
    let normality_threshold = chi2_quantile(1.0 - alpha_w, 2)?;

    Ok(ResidualDiagnostics {
        autocorrelations,
        whiteness_pass: whiteness_statistic <= whiteness_threshold,
        whiteness_statistic,
        whiteness_threshold,
        normality_pass: normality_statistic <= normality_threshold,
        normality_statistic,
        normality_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::simulate_ar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_passes_at_nominal_rate() {
        let alpha = 0.05;
        let trials = 200;
        let passes = (0..trials)
            .filter(|&s| residual_diagnostics(&gaussian(1000, s), 10, alpha).unwrap().whiteness_pass)
            .count();
        let rate = passes as f64 / trials as f64;
        assert!((rate - (1.0 - alpha)).abs() <= 0.05, "pass rate {rate}");
    }

    #[test]
    fn correlated_residuals_fail() {
        let trials = 200;
        let fails = (0..trials)
            .filter(|&s| {
                let e = simulate_ar(&[-0.9], &gaussian(1000, 1000 + s));
                !residual_diagnostics(&e, 10, 0.05).unwrap().whiteness_pass
            })
            .count();
        assert!(fails as f64 >= 0.99 * trials as f64);
    }

    #[test]
    fn autocorrelations_bounded() {
        let e: Vec<f64> = (0..50).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
        let d = residual_diagnostics(&e, 20, 0.05).unwrap();
        assert!(d.autocorrelations.iter().all(|r| r.abs() <= 1.0));
    }

    #[test]
    fn skewed_residuals_fail_normality() {
        let e: Vec<f64> = gaussian(2000, 5).iter().map(|v| v.exp()).collect();
        assert!(!residual_diagnostics(&e, 5, 0.05).unwrap().normality_pass);
    }

    #[test]
    fn constant_residuals_rejected() {
        assert!(residual_diagnostics(&[2.0; 30], 3, 0.05).is_err());
        assert!(residual_diagnostics(&[1.0, 2.0], 2, 0.05).is_err());
    }
}
