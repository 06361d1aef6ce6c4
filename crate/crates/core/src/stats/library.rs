//! Baseline-phase state library and the inspection-phase tests run against it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::covariance::{experimental_covariance, mean_vector};
use super::qtest::{difference, quadratic_form, QTest, RiskSpec, SingularPolicy};
use crate::ar::ArModel;
use crate::error::{Error, Result};
use crate::reduce::{pca_fit, svd_select, PcaTruncation, ReducedBasis, SvdSelection};

/// Label reported when no damage hypothesis is accepted.
pub const UNIDENTIFIED: &str = "unidentified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceSource {
    /// Sample covariance of per-realization estimates.
    #[default]
    Experimental,
    /// Mean of the estimator's asymptotic covariances.
    Theoretical,
}

/// Which covariance each damage hypothesis is tested with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum IdentificationCovariance {
    #[default]
    Own,
    SharedBaseline,
}

/// How `δP` is formed from reference and inspection covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaCovariance {
    /// `δP = 2·P_ref`.
    #[default]
    TwiceReference,
    /// `δP = P_ref + P_u`, with `P_u` the inspection model's own covariance.
    Sum,
}

/// Reduction requested by the user, fitted on the healthy baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionSpec {
    Standard,
    Svd { m: usize },
    Pca(PcaTruncation),
    /// Explicit 0-based parameter indices.
    Indices(Vec<usize>),
}

impl ReductionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ReductionSpec::Standard => "standard",
            ReductionSpec::Svd { .. } => "svd",
            ReductionSpec::Pca(_) => "pca",
            ReductionSpec::Indices(_) => "indices",
        }
    }

    pub fn fit(&self, theta_mean: &[f64], covariance: &DMatrix<f64>) -> Result<ReducedBasis> {
        let n = theta_mean.len();
        Ok(match self {
            ReductionSpec::Standard => ReducedBasis::Standard { n },
            ReductionSpec::Svd { m } => ReducedBasis::Selection(svd_select(theta_mean, *m)?),
            ReductionSpec::Indices(idx) => ReducedBasis::Selection(SvdSelection::from_indices(idx, n)?),
            ReductionSpec::Pca(t) => ReducedBasis::Pca(pca_fit(covariance, *t)?),
        })
    }
}

/// Characteristic quantities of one structural state, in reduced coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateModel {
    pub label: String,
    pub theta_mean: Vec<f64>,
    #[serde(with = "matrix_rows")]
    pub covariance: DMatrix<f64>,
    pub realizations: Vec<Vec<f64>>,
}

/// Options governing library construction and testing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LibraryOptions {
    pub covariance_source: CovarianceSource,
    pub identification_covariance: IdentificationCovariance,
    pub delta_covariance: DeltaCovariance,
    pub singular_policy: SingularPolicy,
}

/// Models of every known state, built during the baseline phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateLibrary {
    pub baseline: StateModel,
    pub damage_states: Vec<StateModel>,
    pub reduction: ReducedBasis,
    pub options: LibraryOptions,
}

fn state_moments(models: &[ArModel], source: CovarianceSource) -> Result<(Vec<f64>, Vec<Vec<f64>>, DMatrix<f64>)> {
    let thetas: Vec<Vec<f64>> = models.iter().map(|m| m.theta.clone()).collect();
    let mean = mean_vector(&thetas)?;
    let cov = match source {
        CovarianceSource::Experimental => experimental_covariance(&thetas)?,
        CovarianceSource::Theoretical => {
            let n = mean.len();
            let mut acc = DMatrix::zeros(n, n);
            for m in models {
                if m.covariance.nrows() != n {
                    return Err(Error::DimensionMismatch("model orders differ within a state".into()));
                }
                acc += &m.covariance;
            }
            acc / models.len() as f64
        }
    };
    Ok((mean, thetas, cov))
}

impl StateLibrary {
    /// Builds the library from per-realization models of each state. The
    /// reduction is fitted on the baseline and applied to all states.
    pub fn build(
        baseline: (&str, &[ArModel]),
        damage: &[(&str, &[ArModel])],
        reduction: &ReductionSpec,
        options: LibraryOptions,
    ) -> Result<Self> {
        let (b_mean, b_thetas, b_cov) = state_moments(baseline.1, options.covariance_source)?;
        let basis = reduction.fit(&b_mean, &b_cov)?;
        let reduce = |label: &str, mean: Vec<f64>, thetas: Vec<Vec<f64>>, cov: DMatrix<f64>| -> Result<StateModel> {
            let (theta_mean, covariance) = basis.apply(&mean, &cov)?;
            let realizations = thetas
                .iter()
                .map(|t| basis.apply_vector(t))
                .collect::<Result<Vec<_>>>()?;
            Ok(StateModel {
                label: label.to_string(),
                theta_mean,
                covariance,
                realizations,
            })
        };
        let baseline_model = reduce(baseline.0, b_mean, b_thetas, b_cov)?;
        let mut damage_states = Vec::with_capacity(damage.len());
        for (label, models) in damage {
            let (m, t, c) = state_moments(models, options.covariance_source)?;
            if m.len() != basis.input_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "state {label} has order {}, baseline has {}",
                    m.len(),
                    basis.input_dim()
                )));
            }
            damage_states.push(reduce(label, m, t, c)?);
        }
        Ok(Self {
            baseline: baseline_model,
            damage_states,
            reduction: basis,
            options,
        })
    }

    pub fn dim(&self) -> usize {
        self.reduction.output_dim()
    }

    /// Applies the frozen reduction to an inspection model.
    pub fn reduce(&self, model: &ArModel) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.reduction.apply(&model.theta, &model.covariance)
    }

    fn delta_p(&self, reference: &DMatrix<f64>, inspection: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        match (self.options.delta_covariance, inspection) {
            (DeltaCovariance::TwiceReference, _) => Ok(reference * 2.0),
            (DeltaCovariance::Sum, Some(p_u)) => {
                if p_u.shape() != reference.shape() {
                    return Err(Error::DimensionMismatch("inspection covariance shape".into()));
                }
                Ok(reference + p_u)
            }
            (DeltaCovariance::Sum, None) => Err(Error::InvalidArgument(
                "δP = P_o + P_u needs the inspection covariance".into(),
            )),
        }
    }

    fn test_against(
        &self,
        state: &StateModel,
        covariance: &DMatrix<f64>,
        theta_u: &[f64],
        p_u: Option<&DMatrix<f64>>,
        risk: RiskSpec,
    ) -> Result<QTest> {
        let delta = difference(theta_u, &state.theta_mean)?;
        let dp = self.delta_p(covariance, p_u)?;
        let q = quadratic_form(&delta, &dp, self.options.singular_policy)?;
        QTest::evaluate(q, self.dim(), risk)
    }

    /// Healthy iff `Q ≤ threshold`. `theta_u` must already be reduced.
    pub fn detect(&self, theta_u: &[f64], p_u: Option<&DMatrix<f64>>, risk: RiskSpec) -> Result<QTest> {
        self.test_against(&self.baseline, &self.baseline.covariance, theta_u, p_u, risk)
    }

    /// Tests every damage hypothesis and returns the accepted one with the
    /// smallest Q, or [`UNIDENTIFIED`].
    pub fn identify(&self, theta_u: &[f64], p_u: Option<&DMatrix<f64>>, risk: RiskSpec) -> Result<Identification> {
        if self.damage_states.is_empty() {
            return Err(Error::InvalidArgument("library has no damage states".into()));
        }
        let mut scores = Vec::with_capacity(self.damage_states.len());
        for s in &self.damage_states {
            let cov = match self.options.identification_covariance {
                IdentificationCovariance::Own => &s.covariance,
                IdentificationCovariance::SharedBaseline => &self.baseline.covariance,
            };
            let t = self.test_against(s, cov, theta_u, p_u, risk)?;
            scores.push(HypothesisScore {
                label: s.label.clone(),
                q_value: t.q_value,
                threshold: t.threshold,
                accepted: t.q_value <= t.threshold,
            });
        }
        let best = scores
            .iter()
            .filter(|s| s.accepted)
            .min_by(|a, b| a.q_value.total_cmp(&b.q_value));
        Ok(Identification {
            label: best.map_or_else(|| UNIDENTIFIED.to_string(), |s| s.label.clone()),
            scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisScore {
    pub label: String,
    pub q_value: f64,
    pub threshold: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub label: String,
    pub scores: Vec<HypothesisScore>,
}

/// Free-function form of [`StateLibrary::detect`] using `δP = 2·P_o`.
pub fn detect(lib: &StateLibrary, theta_u: &[f64], risk: RiskSpec) -> Result<QTest> {
    lib.detect(theta_u, None, risk)
}

/// Free-function form of [`StateLibrary::identify`].
pub fn identify(lib: &StateLibrary, theta_u: &[f64], risk: RiskSpec) -> Result<Identification> {
    lib.identify(theta_u, None, risk)
}

/// Serializes a matrix as a list of rows.
mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let n = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != c) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
    }
}
