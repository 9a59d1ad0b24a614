use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ordroc_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("{0}")]
    Usage(String),
    #[error("fit did not converge after {iterations} iterations (score max-norm {gradient_norm:.3e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },
    #[error("replication {replication}: {source}")]
    Replication { replication: u64, source: ordroc_core::Error },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit status: 1 for statistical failures, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(e) | Error::Replication { source: e, .. } if e.is_statistical() => 1,
            Error::NotConverged { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
