use std::path::PathBuf;

use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("inconsistent sample_rate: record {row} has {found} Hz, expected {expected} Hz")]
    InconsistentSampleRate {
        row: usize,
        expected: f64,
        found: f64,
    },

    #[error("ragged ensemble: record {row} has {found} samples, expected {expected}")]
    RaggedLength {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => ErrorKind::Config,
            Error::SingularSystem { .. } | Error::Numerical(_) => ErrorKind::Numerical,
            Error::InvalidSignal(_)
            | Error::Parse { .. }
            | Error::MissingColumn { .. }
            | Error::InconsistentSampleRate { .. }
            | Error::RaggedLength { .. }
            | Error::DimensionMismatch(_)
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
