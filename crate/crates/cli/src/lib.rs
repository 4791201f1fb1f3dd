//! Batch driver for the `spatialgp` library: CSV datasets in, CSV and JSON
//! reports out, each with a manifest sidecar.

pub mod commands;
pub mod config;
pub mod data;
pub mod detrend;
pub mod error;
pub mod manifest;

pub use commands::{run, FitReport, Outcome, COMMANDS};
pub use config::{RunConfig, KEYS, WORKERS_ENV};
pub use error::{CliError, Result};
