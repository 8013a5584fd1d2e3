//! Command implementations behind the `fairmas` binary.
//!
//! Exit codes: 0 success, 1 input error, 2 I/O error, 3 audit violation.

pub mod chart;
pub mod commands;
pub mod output;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub use commands::{
    cmd_batch, cmd_metrics, cmd_reproduce, cmd_run, run_cli, BatchOptions, CommonOptions,
    MetricsOptions, ReproduceOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "FAIRMAS_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn input(e: impl ToString) -> Self {
        CliError::Input(e.to_string())
    }
}
