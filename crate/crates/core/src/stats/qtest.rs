//! The Q statistic and the χ² detection test.
//!
//! For baseline and inspection estimates `θ̂_o, θ̂_u`, the difference
//! `δθ = θ̂_o − θ̂_u` is Gaussian with covariance `δP`; under the healthy
//! hypothesis `δP = 2·P_o` and
//!
//! ```text
//! Q = δθᵀ · δP⁻¹ · δθ  ~  χ²(d),   d = dim θ.
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::chi2::chi2_upper_quantile;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are dropped by the
/// pseudo-inverse.
pub const PINV_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SingularPolicy {
    Reject,
    #[default]
    PseudoInverse,
}

/// Value of a quadratic form and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QValue {
    pub q: f64,
    /// Numerical rank of `δP`.
    pub rank: usize,
    pub pseudo_inverse: bool,
}

/// `δθᵀ·δP⁻¹·δθ`, through a Cholesky solve when `δP` is numerically full
/// rank and an eigenvalue-floored pseudo-inverse otherwise (if permitted).
pub fn quadratic_form(delta: &[f64], delta_p: &DMatrix<f64>, policy: SingularPolicy) -> Result<QValue> {
    let d = delta.len();
    if delta_p.nrows() != d || delta_p.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "δθ has {d} entries, δP is {}×{}",
            delta_p.nrows(),
            delta_p.ncols()
        )));
    }
    let v = DVector::from_column_slice(delta);
    let eig = delta_p.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let floor = PINV_FLOOR * lmax;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > floor).count();
    if rank == d && lmax > 0.0 {
        if let Some(chol) = delta_p.clone().cholesky() {
            let q = v.dot(&chol.solve(&v));
            return Ok(QValue {
                q: q.max(0.0),
                rank,
                pseudo_inverse: false,
            });
        }
    }
    if policy == SingularPolicy::Reject || !(lmax > 0.0) {
        let condition = if rank == 0 {
            f64::INFINITY
        } else {
            lmax / eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).abs()
        };
        return Err(Error::SingularSystem { condition });
    }
    let mut q = 0.0;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > floor {
            let proj = eig.eigenvectors.column(k).dot(&v);
            q += proj * proj / l;
        }
    }
    Ok(QValue {
        q,
        rank,
        pseudo_inverse: true,
    })
}

/// `Q = (θ_u − θ_ref)ᵀ (2·P_ref)⁻¹ (θ_u − θ_ref)`.
pub fn q_statistic(
    theta_u: &[f64],
    theta_ref: &[f64],
    p_ref: &DMatrix<f64>,
    policy: SingularPolicy,
) -> Result<QValue> {
    quadratic_form(&difference(theta_u, theta_ref)?, &(p_ref * 2.0), policy)
}

pub(crate) fn difference(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "parameter vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Type-I risk or a hand-picked threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskSpec {
    Alpha(f64),
    Manual(f64),
}

impl RiskSpec {
    /// `χ²_{1−α}(d)`, or the manual value.
    pub fn threshold(&self, dof: usize) -> Result<f64> {
        match *self {
            RiskSpec::Alpha(a) => {
                if !(a > 0.0 && a < 1.0) {
                    return Err(Error::InvalidArgument(format!("α = {a} must lie in (0, 1)")));
                }
                chi2_upper_quantile(a, dof as u32)
            }
            RiskSpec::Manual(t) => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "manual threshold {t} must be positive"
                    )));
                }
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Healthy,
    Damaged,
}

/// Outcome of one detection test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTest {
    pub q_value: f64,
    pub dof: usize,
    pub risk: RiskSpec,
    pub threshold: f64,
    pub decision: Decision,
    pub rank: usize,
    pub pseudo_inverse: bool,
}

impl QTest {
    pub fn evaluate(q: QValue, dof: usize, risk: RiskSpec) -> Result<Self> {
        let threshold = risk.threshold(dof)?;
        Ok(Self {
            q_value: q.q,
            dof,
            risk,
            threshold,
            decision: if q.q <= threshold {
                Decision::Healthy
            } else {
                Decision::Damaged
            },
            rank: q.rank,
            pseudo_inverse: q.pseudo_inverse,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi2_quantile;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn null_difference() {
        let p = DMatrix::identity(3, 3);
        let q = q_statistic(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &p, SingularPolicy::Reject).unwrap();
        assert_eq!(q.q, 0.0);
    }

    #[test]
    fn scalar_case() {
        let p = DMatrix::from_element(1, 1, 0.5);
        let q = q_statistic(&[1.0], &[0.0], &p, SingularPolicy::Reject).unwrap();
        assert!((q.q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_covariance_policy() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            q_statistic(&[1.0, 0.0], &[0.0, 0.0], &p, SingularPolicy::Reject),
            Err(Error::SingularSystem { .. })
        ));
        let q = q_statistic(&[1.0, 1.0], &[0.0, 0.0], &p, SingularPolicy::PseudoInverse).unwrap();
        assert_eq!(q.rank, 1);
        assert!(q.pseudo_inverse);
        // δθ = [1,1] lies along the eigenvector with eigenvalue 2·2 = 4: Q = 2/4
        assert!((q.q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = DMatrix::identity(2, 2);
        assert!(q_statistic(&[1.0], &[0.0, 1.0], &p, SingularPolicy::Reject).is_err());
        assert!(q_statistic(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &p, SingularPolicy::Reject).is_err());
    }

    #[test]
    fn risk_validation() {
        assert!(RiskSpec::Alpha(0.0).threshold(2).is_err());
        assert!(RiskSpec::Alpha(1.0).threshold(2).is_err());
        assert!(RiskSpec::Manual(-1.0).threshold(2).is_err());
        assert_eq!(RiskSpec::Manual(42.0).threshold(7).unwrap(), 42.0);
    }

    #[test]
    fn monte_carlo_calibration() {
        let l = DMatrix::from_row_slice(3, 3, &[0.2, 0.0, 0.0, 0.1, 0.3, 0.0, -0.05, 0.02, 0.1]);
        let p = &l * l.transpose();
        let mean = [0.4, -1.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut draw = || -> Vec<f64> {
            let z = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
            (&l * z).iter().zip(&mean).map(|(a, b)| a + b).collect()
        };
        let mut qs: Vec<f64> = (0..10_000)
            .map(|_| {
                let (u, r) = (draw(), draw());
                q_statistic(&u, &r, &p, SingularPolicy::Reject).unwrap().q
            })
            .collect();
        let m = qs.iter().sum::<f64>() / qs.len() as f64;
        assert!((m - 3.0).abs() < 0.05 * 3.0, "mean {m}");
        qs.sort_by(f64::total_cmp);
        let p95 = qs[9500];
        let want = chi2_quantile(0.95, 3).unwrap();
        assert!((p95 - want).abs() < 0.05 * want, "p95 {p95} vs {want}");
    }

    #[test]
    fn raising_alpha_never_clears_damage() {
        let q = QValue { q: 6.0, rank: 2, pseudo_inverse: false };
        let mut was_damaged = false;
        for a in [1e-6, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9] {
            let t = QTest::evaluate(q, 2, RiskSpec::Alpha(a)).unwrap();
            if was_damaged {
                assert_eq!(t.decision, Decision::Damaged);
            }
            was_damaged = t.decision == Decision::Damaged;
        }
        assert!(was_damaged);
    }

    fn invertible_3x3() -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-1.0..1.0f64, 9).prop_map(|v| {
            DMatrix::from_row_slice(3, 3, &v) + DMatrix::identity(3, 3) * 2.5
        })
    }

    proptest! {
        #[test]
        fn invariant_under_reparameterization(
            a in invertible_3x3(),
            u in prop::collection::vec(-3.0..3.0f64, 3),
            r in prop::collection::vec(-3.0..3.0f64, 3),
            l in prop::collection::vec(-1.0..1.0f64, 9),
        ) {
            let lm = DMatrix::from_row_slice(3, 3, &l) + DMatrix::identity(3, 3);
            let p = &lm * lm.transpose();
            let base = q_statistic(&u, &r, &p, SingularPolicy::Reject).unwrap().q;
            let tu: Vec<f64> = (&a * DVector::from_vec(u)).iter().copied().collect();
            let tr: Vec<f64> = (&a * DVector::from_vec(r)).iter().copied().collect();
            let tp = &a * &p * a.transpose();
            let moved = q_statistic(&tu, &tr, &tp, SingularPolicy::Reject).unwrap().q;
            prop_assert!((base - moved).abs() <= 1e-8 * base.max(1.0));
        }

        #[test]
        fn q_is_nonnegative(u in prop::collection::vec(-3.0..3.0f64, 3), l in prop::collection::vec(-1.0..1.0f64, 9)) {
            let lm = DMatrix::from_row_slice(3, 3, &l);
            let p = &lm * lm.transpose() + DMatrix::identity(3, 3) * 1e-3;
            prop_assert!(q_statistic(&u, &[0.0; 3], &p, SingularPolicy::PseudoInverse).unwrap().q >= 0.0);
        }
    }
}
