//! Damage detection and identification for guided-wave structural health
//! monitoring, built on autoregressive models of the sensor responses.
//!
//! The pipeline: fit AR models to baseline-phase records of every known
//! structural state ([`ar`]), optionally reduce the parameter space
//! ([`reduce`]), build a [`stats::StateLibrary`], and test inspection records
//! against it with χ² tests on the Q statistic. [`damage_index`] provides a
//! non-parametric reference index, and [`cli`] drives the whole thing from a
//! JSON configuration.

pub mod ar;
pub mod cli;
pub mod damage_index;
pub mod error;
pub mod reduce;
pub mod signals;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
