//! Configuration, experiment execution and machine-readable output for the
//! `orgfw` online Frank-Wolfe toolkit.
//!
//! A run reads a TOML [`RunConfig`], builds one stream per seed, plays every
//! configured algorithm on it, and writes `<ALGO>.csv` (schema in [`records`])
//! plus `summary.json` into the output directory.

pub mod compare;
pub mod config;
pub mod error;
pub mod experiment;
pub mod records;

pub use compare::{compare, CompareSummary};
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use experiment::{run_experiment, RunOutput, RunSummary};
