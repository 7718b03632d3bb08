//! Command-line driver for relwave: scenario presets, sweeps, and CSV/JSON
//! report files.

pub mod commands;
pub mod config;
mod error;
pub mod output;
pub mod svg;

pub use commands::{
    cmd_coeffs, cmd_compare, cmd_evolve, cmd_report, cmd_sweep, CompareReport, Outcome, ReportBundle,
    Summary,
};
pub use config::{Resolved, RunConfig, Scenario, SweepRange};
pub use error::{CliError, Result};
