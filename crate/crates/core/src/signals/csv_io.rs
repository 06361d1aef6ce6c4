//! CSV ensemble format: one record per row, samples as a quoted
//! semicolon-separated list.
//!
//! ```text
//! path_id,state_label,realization_index,sample_rate,samples
//! "2-6","healthy",0,2000000,"0.0;0.013;..."
//! ```

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{SignalEnsemble, SignalRecord};
use crate::error::{Error, Result};

/// Column names used to locate each field in the header row.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub path_id: String,
    pub state_label: String,
    pub realization_index: String,
    pub sample_rate: String,
    pub samples: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            path_id: "path_id".into(),
            state_label: "state_label".into(),
            realization_index: "realization_index".into(),
            sample_rate: "sample_rate".into(),
            samples: "samples".into(),
        }
    }
}

/// Reads and validates an ensemble. Rows are numbered from 1 (first data row)
/// in error messages.
pub fn ingest_csv(path: &Path, schema: &ColumnMap) -> Result<SignalEnsemble> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let c_path = locate(&schema.path_id)?;
    let c_state = locate(&schema.state_label)?;
    let c_real = locate(&schema.realization_index)?;
    let c_rate = locate(&schema.sample_rate)?;
    let c_samples = locate(&schema.samples)?;

    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };

    let mut records = Vec::new();
    let mut expected: Option<(f64, usize)> = None;
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let field = |c: usize| {
            row.get(c)
                .map(str::trim)
                .ok_or_else(|| parse_err(row_no, format!("row has only {} fields", row.len())))
        };
        let path_id = field(c_path)?.to_string();
        let state_label = field(c_state)?.to_string();
        let realization_index: usize = field(c_real)?
            .parse()
            .map_err(|e| parse_err(row_no, format!("realization_index: {e}")))?;
        let sample_rate: f64 = field(c_rate)?
            .parse()
            .map_err(|e| parse_err(row_no, format!("sample_rate: {e}")))?;
        let mut samples = Vec::new();
        for (k, tok) in field(c_samples)?.split(';').enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| parse_err(row_no, format!("sample {k}: {e}")))?;
            if !v.is_finite() {
                return Err(parse_err(
                    row_no,
                    format!(
                        "non-finite sample at index {k} of record ({path_id}, {state_label}, {realization_index})"
                    ),
                ));
            }
            samples.push(v);
        }
        match expected {
            None => expected = Some((sample_rate, samples.len())),
            Some((rate, len)) => {
                if rate != sample_rate {
                    return Err(parse_err(
                        row_no,
                        format!("inconsistent sample_rate: {sample_rate} Hz vs {rate} Hz"),
                    ));
                }
                if len != samples.len() {
                    return Err(parse_err(
                        row_no,
                        format!("ragged length: {} samples vs {len}", samples.len()),
                    ));
                }
            }
        }
        let record = SignalRecord::new(samples, sample_rate, path_id, state_label, realization_index)
            .map_err(|e| parse_err(row_no, e.to_string()))?;
        records.push(record);
    }
    SignalEnsemble::new(records)
}

/// Serializes an ensemble in the format read by [`ingest_csv`]. Sample values
/// use the shortest round-trip decimal representation, so writing is
/// deterministic and lossless.
pub fn write_csv<W: Write>(ensemble: &SignalEnsemble, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::NonNumeric)
        .from_writer(out);
    w.write_record(["path_id", "state_label", "realization_index", "sample_rate", "samples"])?;
    for r in ensemble.records() {
        let samples = r
            .samples
            .iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(";");
        w.write_record([
            r.path_id.as_str(),
            r.state_label.as_str(),
            &r.realization_index.to_string(),
            &format!("{:?}", r.sample_rate),
            &samples,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
