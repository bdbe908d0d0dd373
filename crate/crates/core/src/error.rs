use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the COCOA library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid team: {0}")]
    InvalidTeam(String),

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("enumeration budget exceeded: {needed} assignments > limit {limit}")]
    EnumerationBudget { needed: u128, limit: u128 },

    #[error("gaussian process factorization failed after {attempts} jitter attempts")]
    Factorization { attempts: usize },

    #[error("demonstration record {index}: {reason}")]
    Demonstration { index: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
