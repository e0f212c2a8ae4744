//! Command implementations behind the `newton` binary. Each verb is a plain
//! function so it can be driven from tests without spawning a process.

pub mod commands;
pub mod report;
pub mod svg;

use std::path::PathBuf;

pub use commands::{
    bank_build, bank_inspect, bank_queries, entry_curve, eval, plot, query, resolve_bank_path, state_flow, train,
    QueryInput, QueryOptions, QueryOutcome, TrainOptions, TrainSummary,
};
pub use report::{Metric, Report};

/// Environment variable naming the directory that holds `bank.nbk`.
pub const BANK_DIR_ENV: &str = "NEWTON_BANK_DIR";
pub const BANK_FILE_NAME: &str = "bank.nbk";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] newton_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) if e.is_numeric() => EXIT_NUMERIC,
            CliError::Core(_) => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
