use std::path::PathBuf;

use mdport::analytics::AnalyticsError;
use mdport::estimation::EstimationError;
use mdport::{DataError, ModelError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: malformed header: {message}", path.display())]
    Header { path: PathBuf, message: String },
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("{model} did not solve: {status}")]
    NotSolved { model: String, status: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Header { .. } => "header",
            CliError::Parse { .. } => "parse",
            CliError::Data(_) | CliError::Estimation(_) => "data",
            CliError::Model(_) => "model",
            CliError::Analytics(_) => "analytics",
            CliError::NotSolved { .. } => "solve",
        }
    }

    /// `error kind=<kind> message="<text>"` on a single line.
    pub fn line(&self) -> String {
        format!("error kind={} message={:?}", self.kind(), self.to_string())
    }
}
