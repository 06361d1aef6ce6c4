//! Guided-wave signal records and ensembles.
//!
//! A [`SignalRecord`] is one measured (or synthesized) sensor response for a
//! given actuator-sensor path and structural state. Records of one
//! acquisition campaign are grouped in a [`SignalEnsemble`], which enforces a
//! common sample rate and length so that models fitted to different records
//! are directly comparable.

mod csv_io;
mod preprocess;
mod spectrogram;
mod synth;

pub use csv_io::{ingest_csv, write_csv, ColumnMap};
pub use preprocess::downsample;
pub use spectrogram::{spectrogram, write_spectrogram_csv, Spectrogram};
pub use synth::{
    simulate_ar, synthesize_ar_ensemble, synthesize_ensemble, tone_burst, ArStateSpec, SecondaryPacket,
    SyntheticStateSpec, ToneBurstSpec, WindowKind,
};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One realization of a guided-wave response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub samples: Vec<f64>,
    /// Hz.
    pub sample_rate: f64,
    /// Actuator-sensor pair label, e.g. `"2-6"`.
    pub path_id: String,
    /// `healthy`, `damage-1`, ...
    pub state_label: String,
    pub realization_index: usize,
}

impl SignalRecord {
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        path_id: impl Into<String>,
        state_label: impl Into<String>,
        realization_index: usize,
    ) -> Result<Self> {
        let record = Self {
            samples,
            sample_rate,
            path_id: path_id.into(),
            state_label: state_label.into(),
            realization_index,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::InvalidSignal(format!(
                "record {}/{}/{} has {} samples, need at least 2",
                self.path_id,
                self.state_label,
                self.realization_index,
                self.samples.len()
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidSignal(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "record {}/{}/{}: non-finite sample at index {i}",
                self.path_id, self.state_label, self.realization_index
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A validated collection of records sharing sample rate and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEnsemble {
    records: Vec<SignalRecord>,
    uniform_length: usize,
}

impl SignalEnsemble {
    pub fn new(records: Vec<SignalRecord>) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidSignal("ensemble has no records".into()))?;
        let expected_rate = first.sample_rate;
        let expected_len = first.len();
        let mut seen = HashSet::new();
        for (row, r) in records.iter().enumerate() {
            r.validate()?;
            if r.sample_rate != expected_rate {
                return Err(Error::InconsistentSampleRate {
                    row,
                    expected: expected_rate,
                    found: r.sample_rate,
                });
            }
            if r.len() != expected_len {
                return Err(Error::RaggedLength {
                    row,
                    expected: expected_len,
                    found: r.len(),
                });
            }
            let key = (r.path_id.as_str(), r.state_label.as_str(), r.realization_index);
            if !seen.insert(key) {
                return Err(Error::InvalidSignal(format!(
                    "duplicate record (path {}, state {}, realization {})",
                    r.path_id, r.state_label, r.realization_index
                )));
            }
        }
        Ok(Self {
            records,
            uniform_length: expected_len,
        })
    }

    pub fn records(&self) -> &[SignalRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<SignalRecord> {
        self.records
    }

    pub fn uniform_length(&self) -> usize {
        self.uniform_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.records[0].sample_rate
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Path labels in order of first appearance.
    pub fn paths(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.path_id) {
                out.push(r.path_id.clone());
            }
        }
        out
    }

    /// State labels present on `path`, in order of first appearance.
    pub fn states(&self, path: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in self.records.iter().filter(|r| r.path_id == path) {
            if !out.contains(&r.state_label) {
                out.push(r.state_label.clone());
            }
        }
        out
    }

    /// Records of one (path, state), sorted by realization index.
    pub fn group(&self, path: &str, state: &str) -> Vec<&SignalRecord> {
        let mut g: Vec<&SignalRecord> = self
            .records
            .iter()
            .filter(|r| r.path_id == path && r.state_label == state)
            .collect();
        g.sort_by_key(|r| r.realization_index);
        g
    }

    /// Concatenates two ensembles, re-validating the result.
    pub fn merge(self, other: SignalEnsemble) -> Result<Self> {
        let mut records = self.records;
        records.extend(other.records);
        Self::new(records)
    }

    /// Applies `f` to every record and re-validates.
    pub fn map_records<F>(self, f: F) -> Result<Self>
    where
        F: FnMut(SignalRecord) -> Result<SignalRecord>,
    {
        let records = self.records.into_iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }
}
