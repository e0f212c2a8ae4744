use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("projection error: {0}")]
    Projection(String),

    #[error("flow undefined: {0}")]
    FlowUndefined(String),

    #[error("bank error: {0}")]
    Bank(String),

    #[error("label error: {0}")]
    Label(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("storage error at {}: {source}", path.display())]
    Storage {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn storage(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Storage {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerics rather than by inputs or files.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Projection(_) | Error::FlowUndefined(_) | Error::Training(_) | Error::Metric(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
