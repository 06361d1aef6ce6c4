//! Stationary AR(na) identification.
//!
//! The model is written with the AR polynomial on the left,
//! `y[t] + a_1·y[t−1] + … + a_na·y[t−na] = e[t]`, so the regression form is
//! `y[t] = φᵀ[t]·θ + e[t]` with `φ[t] = [−y[t−1], …, −y[t−na]]`. A
//! decaying first-order signal `y[t] = 0.5·y[t−1]` therefore has `a_1 = −0.5`.
//!
//! Least-squares problems are solved through a QR factorization of the
//! (optionally row-scaled) regressor matrix; the parameter covariance is
//! assembled from the triangular factor, never from an explicit inverse of
//! the normal matrix.

mod diagnostics;
mod order;

pub use diagnostics::{residual_diagnostics, ResidualDiagnostics};
pub use order::{combine_scans, scan_orders, OrderScan, SelectionRule};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solves are refused above this regressor condition estimate.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative floor applied to ensemble residual variances.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    #[default]
    Ols,
    Wls,
}

/// Where a model came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub path_id: String,
    pub state_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realization_index: Option<usize>,
}

/// A fitted AR model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct ArModel {
    pub order: usize,
    /// `[a_1, …, a_na]`.
    pub theta: Vec<f64>,
    pub sigma2_e: f64,
    /// Asymptotic parameter covariance `P_θ`.
    pub covariance: DMatrix<f64>,
    pub estimator: EstimatorKind,
    pub n_samples_used: usize,
    pub provenance: Option<Provenance>,
}

/// On-disk layout: covariance stored row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    order: usize,
    theta: Vec<f64>,
    sigma2_e: f64,
    covariance: Vec<f64>,
    estimator_kind: EstimatorKind,
    n_samples_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl From<ArModel> for ModelFile {
    fn from(m: ArModel) -> Self {
        ModelFile {
            order: m.order,
            covariance: row_major(&m.covariance),
            theta: m.theta,
            sigma2_e: m.sigma2_e,
            estimator_kind: m.estimator,
            n_samples_used: m.n_samples_used,
            provenance: m.provenance,
        }
    }
}

impl TryFrom<ModelFile> for ArModel {
    type Error = String;

    fn try_from(f: ModelFile) -> std::result::Result<Self, String> {
        if f.theta.len() != f.order {
            return Err(format!("theta has {} entries, order is {}", f.theta.len(), f.order));
        }
        if f.covariance.len() != f.order * f.order {
            return Err(format!(
                "covariance has {} entries, expected {}",
                f.covariance.len(),
                f.order * f.order
            ));
        }
        Ok(ArModel {
            order: f.order,
            theta: f.theta,
            sigma2_e: f.sigma2_e,
            covariance: DMatrix::from_row_slice(f.order, f.order, &f.covariance),
            estimator: f.estimator_kind,
            n_samples_used: f.n_samples_used,
            provenance: f.provenance,
        })
    }
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

impl ArModel {
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Stacked regression `y = Φ·θ + e` over `t = na+1 … N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSystem {
    pub regressors: DMatrix<f64>,
    pub target: DVector<f64>,
}

impl RegressionSystem {
    pub fn order(&self) -> usize {
        self.regressors.ncols()
    }

    pub fn rows(&self) -> usize {
        self.regressors.nrows()
    }
}

/// Builds the lagged regressor matrix. Requires `N > 2·na` so that there are
/// more equations than unknowns.
pub fn build_regression(y: &[f64], na: usize) -> Result<RegressionSystem> {
    let n = y.len();
    if na == 0 {
        return Err(Error::InvalidArgument("AR order must be ≥ 1".into()));
    }
    if n <= 2 * na {
        return Err(Error::InvalidArgument(format!(
            "signal of {n} samples is too short for order {na} (need N > 2·na)"
        )));
    }
    let rows = n - na;
    let regressors = DMatrix::from_fn(rows, na, |r, c| -y[r + na - 1 - c]);
    let target = DVector::from_iterator(rows, y[na..].iter().copied());
    Ok(RegressionSystem { regressors, target })
}

struct LsSolution {
    theta: DVector<f64>,
    /// `(AᵀA)⁻¹` of the (scaled) design matrix.
    normal_inverse: DMatrix<f64>,
}

fn solve_least_squares(a: DMatrix<f64>, mut b: DVector<f64>) -> Result<LsSolution> {
    let na = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let sv = r.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularSystem { condition });
    }
    qr.q_tr_mul(&mut b);
    let rhs = b.rows(0, na).into_owned();
    let theta = r
        .solve_upper_triangular(&rhs)
        .ok_or(Error::SingularSystem { condition })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(na, na))
        .ok_or(Error::SingularSystem { condition })?;
    let mut normal_inverse = &r_inv * r_inv.transpose();
    symmetrize(&mut normal_inverse);
    Ok(LsSolution {
        theta,
        normal_inverse,
    })
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn residual_vector(sys: &RegressionSystem, theta: &DVector<f64>) -> DVector<f64> {
    &sys.target - &sys.regressors * theta
}

/// Ordinary least squares: `θ = (ΦᵀΦ)⁻¹Φᵀy`, `σ²_e = mean(e²)`,
/// `P_θ = σ²_e·(ΦᵀΦ)⁻¹`.
pub fn estimate_ols(sys: &RegressionSystem) -> Result<ArModel> {
    let sol = solve_least_squares(sys.regressors.clone(), sys.target.clone())?;
    let e = residual_vector(sys, &sol.theta);
    let sigma2_e = e.norm_squared() / sys.rows() as f64;
    Ok(ArModel {
        order: sys.order(),
        theta: sol.theta.iter().copied().collect(),
        sigma2_e,
        covariance: sol.normal_inverse * sigma2_e,
        estimator: EstimatorKind::Ols,
        n_samples_used: sys.rows(),
        provenance: None,
    })
}

/// Weighted least squares with diagonal residual covariance
/// `Γ = diag(weights)`: `θ = (ΦᵀΓ⁻¹Φ)⁻¹ΦᵀΓ⁻¹y`, `P_θ = (ΦᵀΓ⁻¹Φ)⁻¹`.
/// Residuals and `σ²_e` are recomputed unweighted from the final estimate.
pub fn estimate_wls(sys: &RegressionSystem, weights: &[f64]) -> Result<ArModel> {
    if weights.len() != sys.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} regression rows",
            weights.len(),
            sys.rows()
        )));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "weight {i} is {} (must be positive)",
            weights[i]
        )));
    }
    let scale: Vec<f64> = weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut a = sys.regressors.clone();
    let mut b = sys.target.clone();
    for (r, s) in scale.iter().enumerate() {
        a.row_mut(r).scale_mut(*s);
        b[r] *= s;
    }
    let sol = solve_least_squares(a, b)?;
    let e = residual_vector(sys, &sol.theta);
    Ok(ArModel {
        order: sys.order(),
        theta: sol.theta.iter().copied().collect(),
        sigma2_e: e.norm_squared() / sys.rows() as f64,
        covariance: sol.normal_inverse,
        estimator: EstimatorKind::Wls,
        n_samples_used: sys.rows(),
        provenance: None,
    })
}

/// Per-time-index variance of OLS residuals across realizations, used as the
/// diagonal of `Γ` for [`estimate_wls`].
///
/// Variances are unbiased (divisor R−1) and floored at
/// `VARIANCE_FLOOR × mean variance` (or `VARIANCE_FLOOR` itself when every
/// variance is zero).
pub fn ensemble_residual_weights<S: AsRef<[f64]>>(realizations: &[S], na: usize) -> Result<Vec<f64>> {
    if realizations.len() < 2 {
        return Err(Error::InvalidArgument(
            "residual weights need at least 2 realizations".into(),
        ));
    }
    let len = realizations[0].as_ref().len();
    let mut all = Vec::with_capacity(realizations.len());
    for y in realizations {
        let y = y.as_ref();
        if y.len() != len {
            return Err(Error::DimensionMismatch("realizations differ in length".into()));
        }
        let model = estimate_ols(&build_regression(y, na)?)?;
        all.push(residuals(&model, y)?);
    }
    let count = all.len() as f64;
    let rows = len - na;
    let mut var: Vec<f64> = (0..rows)
        .map(|t| {
            let mean = all.iter().map(|e| e[t]).sum::<f64>() / count;
            all.iter().map(|e| (e[t] - mean).powi(2)).sum::<f64>() / (count - 1.0)
        })
        .collect();
    let mean_var = var.iter().sum::<f64>() / rows as f64;
    let floor = if mean_var > 0.0 {
        VARIANCE_FLOOR * mean_var
    } else {
        VARIANCE_FLOOR
    };
    for v in &mut var {
        *v = v.max(floor);
    }
    Ok(var)
}

/// One-step-ahead prediction errors `e[t] = y[t] + Σ a_i·y[t−i]` for
/// `t = na+1 … N`.
pub fn residuals(model: &ArModel, y: &[f64]) -> Result<Vec<f64>> {
    let na = model.theta.len();
    if y.len() <= na {
        return Err(Error::InvalidArgument(format!(
            "signal of {} samples is too short for order {na}",
            y.len()
        )));
    }
    Ok((na..y.len())
        .map(|t| {
            let mut e = y[t];
            for (i, a) in model.theta.iter().enumerate() {
                e += a * y[t - 1 - i];
            }
            e
        })
        .collect())
}

/// Fits one realization with the requested estimator.
pub fn fit(y: &[f64], na: usize, kind: EstimatorKind, weights: Option<&[f64]>) -> Result<ArModel> {
    let sys = build_regression(y, na)?;
    match kind {
        EstimatorKind::Ols => estimate_ols(&sys),
        EstimatorKind::Wls => {
            let w = weights.ok_or_else(|| {
                Error::InvalidArgument("WLS estimation requires residual weights".into())
            })?;
            estimate_wls(&sys, w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::simulate_ar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn innovations(n: usize, std: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(0.0, std).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn regression_unrolling_order_one() {
        let sys = build_regression(&[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        assert_eq!(sys.regressors, DMatrix::from_row_slice(3, 1, &[-1.0, -2.0, -3.0]));
        assert_eq!(sys.target.as_slice(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn regression_unrolling_order_two() {
        let sys = build_regression(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap();
        assert_eq!(
            sys.regressors,
            DMatrix::from_row_slice(3, 2, &[-2.0, -1.0, -3.0, -2.0, -4.0, -3.0])
        );
        assert_eq!(sys.target.as_slice(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn regression_needs_more_rows_than_unknowns() {
        assert!(build_regression(&[1.0, 2.0, 3.0, 4.0], 2).is_err());
        assert!(build_regression(&[1.0, 2.0, 3.0], 0).is_err());
    }

    #[test]
    fn noiseless_first_order_decay() {
        let y: Vec<f64> = (0..40).map(|t| 0.5_f64.powi(t)).collect();
        let m = estimate_ols(&build_regression(&y, 1).unwrap()).unwrap();
        assert!((m.theta[0] + 0.5).abs() < 1e-14);
        assert!(m.sigma2_e < 1e-28);
    }

    #[test]
    fn zero_signal_is_singular() {
        let err = estimate_ols(&build_regression(&[0.0; 50], 2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::SingularSystem { .. }));
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_regressors() {
        let y = simulate_ar(&[-1.5, 0.7], &innovations(800, 1.0, 3));
        let sys = build_regression(&y, 3).unwrap();
        let m = estimate_ols(&sys).unwrap();
        let e = DVector::from_vec(residuals(&m, &y).unwrap());
        let g = sys.regressors.transpose() * e;
        let scale = sys.regressors.norm() * sys.target.norm();
        assert!(g.amax() < 1e-12 * scale, "{g}");
    }

    #[test]
    fn uniform_weights_reproduce_ols() {
        let y = simulate_ar(&[-1.5, 0.7, -0.1, 0.05], &innovations(2000, 0.1, 11));
        let sys = build_regression(&y, 4).unwrap();
        let ols = estimate_ols(&sys).unwrap();
        let wls = estimate_wls(&sys, &vec![0.37; sys.rows()]).unwrap();
        for (a, b) in ols.theta.iter().zip(&wls.theta) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        assert!((ols.sigma2_e - wls.sigma2_e).abs() < 1e-12);
        // P_WLS = w·(ΦᵀΦ)⁻¹; P_OLS = σ²·(ΦᵀΦ)⁻¹
        let ratio = wls.covariance[(0, 0)] / ols.covariance[(0, 0)];
        assert!((ratio - 0.37 / ols.sigma2_e).abs() < 1e-8 * ratio);
    }

    #[test]
    fn wls_rejects_bad_weights() {
        let y = simulate_ar(&[-0.5], &innovations(100, 1.0, 1));
        let sys = build_regression(&y, 1).unwrap();
        let mut w = vec![1.0; sys.rows()];
        w[5] = 0.0;
        assert!(estimate_wls(&sys, &w).is_err());
        assert!(estimate_wls(&sys, &w[..10]).is_err());
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let y = simulate_ar(&[-1.5, 0.7, -0.1, 0.05], &innovations(1000, 0.1, 5));
        let sys = build_regression(&y, 6).unwrap();
        for m in [
            estimate_ols(&sys).unwrap(),
            estimate_wls(&sys, &(0..sys.rows()).map(|i| 1.0 + (i % 7) as f64).collect::<Vec<_>>())
                .unwrap(),
        ] {
            let p = &m.covariance;
            assert_eq!(p, &p.transpose());
            let eig = p.clone().symmetric_eigen();
            let eps = 1e-10 * p.trace();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -eps));
        }
    }

    #[test]
    fn residuals_with_true_parameters_recover_innovations() {
        let theta = [-1.5, 0.7, -0.1, 0.05];
        let e = innovations(500, 0.1, 9);
        let y = simulate_ar(&theta, &e);
        let model = ArModel {
            order: 4,
            theta: theta.to_vec(),
            sigma2_e: 0.01,
            covariance: DMatrix::zeros(4, 4),
            estimator: EstimatorKind::Ols,
            n_samples_used: 0,
            provenance: None,
        };
        let r = residuals(&model, &y).unwrap();
        for (got, want) in r.iter().zip(&e[4..]) {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-3));
        }
    }

    #[test]
    fn zero_parameter_model_returns_signal_tail() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let model = ArModel {
            order: 2,
            theta: vec![0.0, 0.0],
            sigma2_e: 0.0,
            covariance: DMatrix::zeros(2, 2),
            estimator: EstimatorKind::Ols,
            n_samples_used: 0,
            provenance: None,
        };
        assert_eq!(residuals(&model, &y).unwrap(), vec![3.0, 4.0, 5.0]);
        assert!(residuals(&model, &y[..2]).is_err());
    }

    #[test]
    fn identical_realizations_hit_the_floor() {
        let y = simulate_ar(&[-0.8], &innovations(200, 1.0, 4));
        let w = ensemble_residual_weights(&[y.clone(), y.clone(), y], 2).unwrap();
        assert_eq!(w.len(), 198);
        // rounding in the mean leaves ~1e-30 variances; they must stay positive and negligible
        assert!(w.iter().all(|&v| v > 0.0 && v <= VARIANCE_FLOOR));
    }

    #[test]
    fn residual_weights_need_two_realizations() {
        let y = simulate_ar(&[-0.8], &innovations(200, 1.0, 4));
        assert!(ensemble_residual_weights(&[y], 2).is_err());
    }

    #[test]
    fn model_json_round_trip() {
        let y = simulate_ar(&[-1.2, 0.5], &innovations(300, 1.0, 2));
        let m = estimate_ols(&build_regression(&y, 2).unwrap())
            .unwrap()
            .with_provenance(Provenance {
                path_id: "2-6".into(),
                state_label: "healthy".into(),
                realization_index: Some(3),
            });
        let json = m.to_json().unwrap();
        assert!(json.contains("\"estimator_kind\": \"ols\""));
        assert_eq!(ArModel::from_json(&json).unwrap(), m);
        let bad = json.replace("\"order\": 2", "\"order\": 3");
        assert!(ArModel::from_json(&bad).is_err());
    }
    fn mean_max_error(theta: &[f64], n: usize, seeds: u64) -> f64 {
        (0..seeds)
            .map(|seed| {
                let y = simulate_ar(theta, &innovations(n, 0.1, 1000 + seed));
                let m = estimate_ols(&build_regression(&y, theta.len()).unwrap()).unwrap();
                m.theta.iter().zip(theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .sum::<f64>()
            / seeds as f64
    }

    #[test]
    fn ols_error_shrinks_like_inverse_root_n() {
        let theta = [-1.5, 0.7, -0.1, 0.05];
        let ratio = mean_max_error(&theta, 1000, 60) / mean_max_error(&theta, 4000, 60);
        assert!((1.5..=2.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn wls_with_ensemble_weights_stays_within_one_standard_error() {
        let theta = [-1.2, 0.5];
        let ys: Vec<Vec<f64>> = (0..10).map(|r| simulate_ar(&theta, &innovations(800, 0.2, 50 + r))).collect();
        let w = ensemble_residual_weights(&ys, 2).unwrap();
        for y in &ys {
            let sys = build_regression(y, 2).unwrap();
            let ols = estimate_ols(&sys).unwrap();
            let wls = estimate_wls(&sys, &w).unwrap();
            for i in 0..2 {
                let se = ols.covariance[(i, i)].sqrt();
                assert!((wls.theta[i] - ols.theta[i]).abs() <= se, "coefficient {i}");
            }
        }
    }

    #[test]
    fn residual_weights_match_innovation_variance() {
        // two independent realizations: each weight is (e1-e2)^2/2 with mean sigma^2
        let sigma2: f64 = 0.04;
        let (n, seeds) = (600, 100);
        let mut acc = vec![0.0; n - 2];
        for seed in 0..seeds {
            let a = simulate_ar(&[-1.2, 0.5], &innovations(n, sigma2.sqrt(), 2 * seed));
            let b = simulate_ar(&[-1.2, 0.5], &innovations(n, sigma2.sqrt(), 2 * seed + 1));
            for (s, v) in acc.iter_mut().zip(ensemble_residual_weights(&[a, b], 2).unwrap()) {
                *s += v / seeds as f64;
            }
        }
        let overall = acc.iter().sum::<f64>() / acc.len() as f64;
        assert!((overall / sigma2 - 1.0).abs() < 0.03, "overall {overall}");
        // per index the average of 100 chi2(1)/1 draws has relative sd ~0.14
        assert!(acc.iter().all(|&v| (v / sigma2 - 1.0).abs() < 0.75));
    }
}
