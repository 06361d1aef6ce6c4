//! Parameter reduction fitted on the healthy baseline.
//!
//! Two routes are provided. [`svd_select`] ranks AR parameters by the
//! eigenvalue magnitudes of the diagonal matrix `D(θ_o)` and keeps the top
//! `m` original coordinates. [`pca_fit`] diagonalizes the baseline parameter
//! covariance and projects onto its leading singular directions. Either
//! result is frozen into a [`ReducedBasis`] and applied unchanged to every
//! baseline and inspection vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ar::row_major;
use crate::error::{Error, Result};

/// Energy threshold used when neither a threshold nor a fixed `m` is given.
pub const DEFAULT_ENERGY_PCT: f64 = 99.0;

/// Tolerance, in percentage points, when comparing Ψ_m to a threshold.
const ENERGY_TOLERANCE: f64 = 1e-9;

/// Top-`m` parameter selection by eigenvalue magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdSelection {
    /// Eigenvalues of `D(θ_o)` ordered by decreasing magnitude.
    pub eigenvalues_sorted: Vec<f64>,
    /// Original (0-based) parameter index of each sorted eigenvalue.
    pub ranked_indices: Vec<usize>,
    /// The retained original indices, in rank order.
    pub selected_indices: Vec<usize>,
    pub m: usize,
    pub n: usize,
}

impl SvdSelection {
    /// A user-specified index list, e.g. a top-2 selection augmented by hand.
    pub fn from_indices(indices: &[usize], n: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() > n {
            return Err(Error::InvalidArgument(format!(
                "index list must hold between 1 and {n} entries"
            )));
        }
        for (k, &i) in indices.iter().enumerate() {
            if i >= n {
                return Err(Error::InvalidArgument(format!("index {i} out of range for {n} parameters")));
            }
            if indices[..k].contains(&i) {
                return Err(Error::InvalidArgument(format!("index {i} listed twice")));
            }
        }
        Ok(Self {
            eigenvalues_sorted: Vec::new(),
            ranked_indices: Vec::new(),
            selected_indices: indices.to_vec(),
            m: indices.len(),
            n,
        })
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.eigenvalues_sorted.iter().map(|v| v.abs()).collect()
    }
}

/// Eigendecomposes `D(θ)` and keeps the `m` parameters with the largest
/// eigenvalue magnitude. Ties go to the lower original index.
pub fn svd_select(theta_baseline: &[f64], m: usize) -> Result<SvdSelection> {
    let n = theta_baseline.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("m = {m} must lie in [1, {n}]")));
    }
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(theta_baseline));
    let eig = d.clone().symmetric_eigen();
    // each eigenvector names the parameter of its dominant component; the
    // eigenvalue is taken as the Rayleigh quotient at that unit coordinate
    // vector, i.e. the diagonal entry itself, which the iterative solver only
    // reproduces to rounding
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let i = eig.eigenvectors.column(k).iamax();
            (d[(i, i)], i)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(a.1.cmp(&b.1)));
    let ranked_indices: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    Ok(SvdSelection {
        eigenvalues_sorted: pairs.iter().map(|p| p.0).collect(),
        selected_indices: ranked_indices[..m].to_vec(),
        ranked_indices,
        m,
        n,
    })
}

/// Extracts the selected entries of `theta` and the matching principal
/// submatrix of `p`.
pub fn apply_selection(sel: &SvdSelection, theta: &[f64], p: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_dims(sel.n, theta, p)?;
    let idx = &sel.selected_indices;
    let t = idx.iter().map(|&i| theta[i]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| p[(idx[r], idx[c])]);
    Ok((t, sub))
}

fn check_dims(n: usize, theta: &[f64], p: &DMatrix<f64>) -> Result<()> {
    if theta.len() != n || p.nrows() != n || p.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "basis expects {n} parameters, got theta of {} and {}×{} covariance",
            theta.len(),
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(())
}

/// Orthonormal leading subspace of the baseline covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "PcaFile", try_from = "PcaFile")]
pub struct PcaBasis {
    /// `n × m` with orthonormal columns.
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub m: usize,
    /// Ψ_m, percent.
    pub energy_retained: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PcaFile {
    rows: usize,
    m: usize,
    basis_row_major: Vec<f64>,
    singular_values: Vec<f64>,
    energy_retained: f64,
}

impl From<PcaBasis> for PcaFile {
    fn from(b: PcaBasis) -> Self {
        PcaFile {
            rows: b.basis.nrows(),
            m: b.m,
            basis_row_major: row_major(&b.basis),
            singular_values: b.singular_values,
            energy_retained: b.energy_retained,
        }
    }
}

impl TryFrom<PcaFile> for PcaBasis {
    type Error = String;

    fn try_from(f: PcaFile) -> std::result::Result<Self, String> {
        if f.basis_row_major.len() != f.rows * f.m {
            return Err("basis size does not match rows × m".into());
        }
        Ok(PcaBasis {
            basis: DMatrix::from_row_slice(f.rows, f.m, &f.basis_row_major),
            singular_values: f.singular_values,
            m: f.m,
            energy_retained: f.energy_retained,
        })
    }
}

impl PcaBasis {
    /// Ψ_k for `k = 1 … n`.
    pub fn energy_curve(&self) -> Vec<f64> {
        energy_curve(&self.singular_values)
    }
}

/// How many principal directions to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTruncation {
    EnergyPct(f64),
    Fixed(usize),
}

impl Default for PcaTruncation {
    fn default() -> Self {
        PcaTruncation::EnergyPct(DEFAULT_ENERGY_PCT)
    }
}

fn energy_curve(s: &[f64]) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(s.len());
    let mut acc = 0.0;
    for v in s {
        acc += v;
        cumulative.push(acc);
    }
    // the last partial sum is the total, so Ψ_n is exactly 100
    cumulative.iter().map(|c| c / acc * 100.0).collect()
}

/// SVD of a symmetric PSD covariance and truncation by energy or fixed `m`.
/// Singular vectors are signed so that each column's largest-magnitude entry
/// is positive.
pub fn pca_fit(p_baseline: &DMatrix<f64>, truncation: PcaTruncation) -> Result<PcaBasis> {
    let n = p_baseline.nrows();
    if n == 0 || p_baseline.ncols() != n {
        return Err(Error::DimensionMismatch("covariance must be square and non-empty".into()));
    }
    let scale = p_baseline.amax();
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument("covariance is all zero".into()));
    }
    let asym = (p_baseline - p_baseline.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::InvalidArgument(format!(
            "covariance is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let svd = p_baseline.clone().svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD produced no left vectors".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let psi = energy_curve(&singular_values);

    let m = match truncation {
        PcaTruncation::Fixed(m) => {
            if m == 0 || m > n {
                return Err(Error::InvalidArgument(format!("m = {m} must lie in [1, {n}]")));
            }
            m
        }
        PcaTruncation::EnergyPct(t) => {
            if !(t > 0.0 && t <= 100.0) {
                return Err(Error::InvalidArgument(format!(
                    "energy threshold {t} must lie in (0, 100]"
                )));
            }
            psi.iter().position(|&v| v >= t - ENERGY_TOLERANCE).unwrap_or(n - 1) + 1
        }
    };

    let mut basis = DMatrix::zeros(n, m);
    for (j, &k) in order.iter().take(m).enumerate() {
        let mut col = u.column(k).into_owned();
        let lead = col.iamax();
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        basis.set_column(j, &col);
    }
    Ok(PcaBasis {
        basis,
        energy_retained: psi[m - 1],
        singular_values,
        m,
    })
}

/// `(U_mᵀθ, U_mᵀ·P·U_m)`.
pub fn pca_project(basis: &PcaBasis, theta: &[f64], p: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_dims(basis.basis.nrows(), theta, p)?;
    let ut = basis.basis.transpose();
    let t = &ut * DVector::from_column_slice(theta);
    let mut cov = &ut * p * &basis.basis;
    crate::ar::symmetrize(&mut cov);
    Ok((t.iter().copied().collect(), cov))
}

/// The reduction applied to every parameter vector of a diagnosis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReducedBasis {
    /// All parameters, untouched.
    Standard { n: usize },
    Selection(SvdSelection),
    Pca(PcaBasis),
}

impl ReducedBasis {
    pub fn input_dim(&self) -> usize {
        match self {
            ReducedBasis::Standard { n } => *n,
            ReducedBasis::Selection(s) => s.n,
            ReducedBasis::Pca(b) => b.basis.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            ReducedBasis::Standard { n } => *n,
            ReducedBasis::Selection(s) => s.m,
            ReducedBasis::Pca(b) => b.m,
        }
    }

    pub fn apply(&self, theta: &[f64], p: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
        match self {
            ReducedBasis::Standard { n } => {
                check_dims(*n, theta, p)?;
                Ok((theta.to_vec(), p.clone()))
            }
            ReducedBasis::Selection(s) => apply_selection(s, theta, p),
            ReducedBasis::Pca(b) => pca_project(b, theta, p),
        }
    }

    pub fn apply_vector(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let n = self.input_dim();
        Ok(self.apply(theta, &DMatrix::zeros(n, n))?.0)
    }
}
