use std::path::PathBuf;

use thiserror::Error;

use crate::optimizer::OptTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid probability range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("{what} of {n} exceeds the supported bound of {max}")]
    Capacity { what: &'static str, n: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("approximation ratio undefined for graph `{graph_id}`: it has no edges")]
    UndefinedRatio { graph_id: String },

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("numerical failure after {} iterates: {message}", trace.iterates.len())]
    NumericalFailure { message: String, trace: Box<OptTrace> },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("missing {what} for graph size {size}")]
    MissingArtifact { size: usize, what: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
