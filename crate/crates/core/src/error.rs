use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // messages embed their cause and do not chain it, so `{:#}` prints it once
    #[error("io error on {path}: {err}")]
    Io { path: PathBuf, err: std::io::Error },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid instance: {}", .0.join("; "))]
    InvalidInstance(Vec<String>),

    #[error("invalid capacity: {0}")]
    InvalidCapacity(String),

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("plan inconsistent with instance: {0}")]
    PlanInconsistency(String),

    #[error("simplex iteration limit {iterations} reached (objective {objective}, gap {gap})")]
    IterationLimit {
        iterations: usize,
        objective: f64,
        gap: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("csv error: {0}")]
    Csv(csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err: source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e)
    }
}
