//! Seeded multi-trial studies around the LPPG solver: configuration, a parallel
//! runner, deterministic CSV/JSON outputs, and the observed-data file reader.

pub mod config;
pub mod input;
pub mod output;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use runner::{run_experiment, ExperimentOutput, ResultRow};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
