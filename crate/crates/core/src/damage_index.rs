//! Time-domain damage index between a baseline and an inspection signal.
//!
//! The inspection signal is normalized to unit energy, the baseline is scaled
//! onto it by least squares, and the index is the energy of what is left:
//!
//! ```text
//! Yu = yu / ‖yu‖,   Yo = yo · ⟨yo, Yu⟩ / ‖yo‖²,   DI = ‖Yu − Yo‖²
//! ```
//!
//! which simplifies to `1 − ⟨yo, Yu⟩² / ‖yo‖²`, so `0 ≤ DI ≤ 1`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::SignalEnsemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiResult {
    pub di: f64,
    pub path_id: String,
    pub state_label: String,
    pub realization_index: usize,
}

/// The index on its own, without record metadata.
pub fn damage_index_value(y_o: &[f64], y_u: &[f64]) -> Result<f64> {
    if y_o.len() != y_u.len() {
        return Err(Error::DimensionMismatch(format!(
            "baseline has {} samples, inspection {}",
            y_o.len(),
            y_u.len()
        )));
    }
    let eu: f64 = y_u.iter().map(|v| v * v).sum();
    let eo: f64 = y_o.iter().map(|v| v * v).sum();
    if !(eu > 0.0) || !(eo > 0.0) {
        return Err(Error::InvalidSignal("damage index needs signals with nonzero energy".into()));
    }
    let nu = eu.sqrt();
    let proj: f64 = y_o.iter().zip(y_u).map(|(o, u)| o * u / nu).sum::<f64>() / eo;
    Ok(y_o
        .iter()
        .zip(y_u)
        .map(|(o, u)| {
            let r = u / nu - o * proj;
            r * r
        })
        .sum())
}

/// [`damage_index_value`] tagged with empty metadata; see [`di_evolution`]
/// for the record-aware form.
pub fn damage_index(y_o: &[f64], y_u: &[f64]) -> Result<DiResult> {
    Ok(DiResult {
        di: damage_index_value(y_o, y_u)?,
        path_id: String::new(),
        state_label: String::new(),
        realization_index: 0,
    })
}

/// DI of every record on `path` against the mean baseline signal, states in
/// first-appearance order (baseline first if it appears first),
/// realizations ascending.
pub fn di_evolution(ensemble: &SignalEnsemble, baseline_state: &str, path: &str) -> Result<Vec<DiResult>> {
    let base = ensemble.group(path, baseline_state);
    if base.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no {baseline_state} records on path {path}"
        )));
    }
    let n = base[0].len();
    let mut mean = vec![0.0; n];
    for r in &base {
        for (m, v) in mean.iter_mut().zip(&r.samples) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= base.len() as f64;
    }
    let mut out = Vec::new();
    for state in ensemble.states(path) {
        for r in ensemble.group(path, &state) {
            out.push(DiResult {
                di: damage_index_value(&mean, &r.samples)?,
                path_id: path.to_string(),
                state_label: state.clone(),
                realization_index: r.realization_index,
            });
        }
    }
    Ok(out)
}

pub fn write_di_csv<W: Write>(results: &[DiResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "state_label", "realization_index", "di"])?;
    for r in results {
        w.write_record([
            r.path_id.clone(),
            r.state_label.clone(),
            r.realization_index.to_string(),
            format!("{:?}", r.di),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
