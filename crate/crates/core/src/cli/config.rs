//! Declarative run configuration. Loaded from JSON; command-line flags
//! override individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar::{EstimatorKind, SelectionRule};
use crate::error::{Error, Result};
use crate::reduce::PcaTruncation;
use crate::signals::{ArStateSpec, ColumnMap, SyntheticStateSpec, ToneBurstSpec};
use crate::stats::{
    CovarianceSource, DeltaCovariance, IdentificationCovariance, ReductionSpec, RiskSpec, SingularPolicy, Sweep,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPath {
    pub path_id: String,
    pub states: Vec<SyntheticStateSpec>,
}

/// Tone-burst surrogate acquired at `acquisition_rate` and decimated by
/// `downsample` before modelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    #[serde(default)]
    pub burst: ToneBurstSpec,
    pub acquisition_rate: f64,
    pub acquisition_length: usize,
    #[serde(default = "one")]
    pub downsample: usize,
    pub realizations: usize,
    pub paths: Vec<SyntheticPath>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArProcessData {
    pub path_id: String,
    pub states: Vec<ArStateSpec>,
    pub realizations: usize,
    pub length: usize,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Five states on a damage-intersecting (2-6) and a non-intersecting
    /// (1-4) path, 7344 samples at 24 MHz decimated to 612 at 2 MHz.
    Aluminum,
    /// Seven states on paths 3-4 and 1-4 with weaker, overlapping damage.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "one")]
        downsample: usize,
    },
    Preset {
        name: Preset,
    },
    Synthetic(SyntheticData),
    ArProcess(ArProcessData),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderScanRange {
    pub min: usize,
    pub max: usize,
    pub rule: SelectionRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderConfig {
    /// Candidate orders to scan on the baseline records; `None` skips the scan.
    pub scan: Option<OrderScanRange>,
    /// Imposes the final order (recorded as an override when a scan also runs).
    pub fixed: Option<usize>,
}

impl Default for OrderConfig {
    fn default() -> Self {
        Self {
            scan: Some(OrderScanRange {
                min: 2,
                max: 15,
                rule: SelectionRule::Plateau,
            }),
            fixed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    pub max_lag: usize,
    pub alpha: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            max_lag: 20,
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Restricts every command to these paths; all paths when absent.
    #[serde(default)]
    pub paths: Option<Vec<String>>,
    #[serde(default = "healthy")]
    pub baseline_label: String,
    #[serde(default)]
    pub order: OrderConfig,
    #[serde(default)]
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub covariance: CovarianceSource,
    #[serde(default = "standard_only")]
    pub methods: Vec<ReductionSpec>,
    #[serde(default = "default_risk")]
    pub risk: RiskSpec,
    #[serde(default)]
    pub identification_covariance: IdentificationCovariance,
    #[serde(default)]
    pub delta_covariance: DeltaCovariance,
    #[serde(default)]
    pub singular_policy: SingularPolicy,
    /// Trailing realizations of each state kept out of the library and used
    /// only for inspection; 0 inspects the library's own records.
    #[serde(default)]
    pub holdout: usize,
    #[serde(default)]
    pub roc_sweep: Sweep,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn healthy() -> String {
    "healthy".into()
}

fn standard_only() -> Vec<ReductionSpec> {
    vec![ReductionSpec::Standard]
}

fn default_risk() -> RiskSpec {
    RiskSpec::Alpha(1e-3)
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Defaults around `data`.
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            paths: None,
            baseline_label: healthy(),
            order: OrderConfig::default(),
            estimator: EstimatorKind::default(),
            covariance: CovarianceSource::default(),
            methods: standard_only(),
            risk: default_risk(),
            identification_covariance: IdentificationCovariance::default(),
            delta_covariance: DeltaCovariance::default(),
            singular_policy: SingularPolicy::default(),
            holdout: 0,
            roc_sweep: Sweep::default(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: default_out(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.order.scan.is_none() && self.order.fixed.is_none() {
            return Err(Error::Config("order needs a scan range or a fixed order".into()));
        }
        if let Some(s) = self.order.scan {
            if s.min == 0 || s.max < s.min {
                return Err(Error::Config(format!("invalid order range {}..={}", s.min, s.max)));
            }
        }
        if self.order.fixed == Some(0) {
            return Err(Error::Config("fixed order must be positive".into()));
        }
        match self.risk {
            RiskSpec::Alpha(a) if !(a > 0.0 && a < 1.0) => {
                return Err(Error::Config(format!("alpha {a} must lie in (0, 1)")))
            }
            RiskSpec::Manual(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::Config(format!("manual threshold {t} must be positive")))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn column_map(&self) -> ColumnMap {
        ColumnMap::default()
    }
}

/// `standard`, `svd:<m>`, `pca:<pct>%`, `pca:<m>`, or `indices:<i>,<j>,…`
/// (0-based).
pub fn parse_method(s: &str) -> Result<ReductionSpec> {
    let bad = || Error::Config(format!("unrecognised method `{s}`"));
    let (name, arg) = match s.split_once(':') {
        Some((n, a)) => (n, Some(a.trim())),
        None => (s, None),
    };
    Ok(match (name.trim(), arg) {
        ("standard", None) => ReductionSpec::Standard,
        ("svd", Some(a)) => ReductionSpec::Svd {
            m: a.parse().map_err(|_| bad())?,
        },
        ("pca", None) => ReductionSpec::Pca(PcaTruncation::default()),
        ("pca", Some(a)) => match a.strip_suffix('%') {
            Some(p) => ReductionSpec::Pca(PcaTruncation::EnergyPct(p.parse().map_err(|_| bad())?)),
            None => ReductionSpec::Pca(PcaTruncation::Fixed(a.parse().map_err(|_| bad())?)),
        },
        ("indices", Some(a)) => ReductionSpec::Indices(
            a.split(',')
                .map(|v| v.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?,
        ),
        _ => return Err(bad()),
    })
}

/// Short name used in output file names, e.g. `svd2`, `pca99`, `idx0-3`.
pub fn method_tag(spec: &ReductionSpec) -> String {
    match spec {
        ReductionSpec::Standard => "standard".into(),
        ReductionSpec::Svd { m } => format!("svd{m}"),
        ReductionSpec::Pca(PcaTruncation::EnergyPct(p)) => format!("pca{p}pct"),
        ReductionSpec::Pca(PcaTruncation::Fixed(m)) => format!("pca{m}"),
        ReductionSpec::Indices(idx) => {
            let parts: Vec<String> = idx.iter().map(usize::to_string).collect();
            format!("idx{}", parts.join("-"))
        }
    }
}

pub fn covariance_tag(c: CovarianceSource) -> &'static str {
    match c {
        CovarianceSource::Experimental => "experimental",
        CovarianceSource::Theoretical => "theoretical",
    }
}
