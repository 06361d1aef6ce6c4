//! Batch driver: simulate or ingest signals, identify AR models, build the
//! state library, and run detection, identification, ROC and damage-index
//! reports.

mod commands;
mod config;
mod presets;

pub use commands::{
    cmd_di, cmd_diagnose, cmd_identify, cmd_roc, cmd_simulate, fit_path, inspect, load_ensemble, write_atomic,
    DetectionReport, IdentifyReport, MethodReport, PathFit, PathIdentification, PathReport, RocSummary,
};
pub use config::{
    covariance_tag, method_tag, parse_method, ArProcessData, DataSource, DiagnosticsConfig, OrderConfig,
    OrderScanRange, Preset, RunConfig, SyntheticData, SyntheticPath,
};
pub use presets::preset;
