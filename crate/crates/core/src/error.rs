use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("score matrix needs at least 2 instances and 1 constraint, got {rows}x{cols}")]
    TooFewInstances { rows: usize, cols: usize },

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("constraint {0} has already been evaluated")]
    AlreadyEvaluated(usize),

    #[error("index {index} out of range for {len} entries")]
    OutOfRange { index: usize, len: usize },

    #[error("conditioning pivot {pivot:e} at index {index} is below jitter {jitter:e}")]
    DegeneratePivot {
        index: usize,
        pivot: f64,
        jitter: f64,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("covariance could not be regularized: jitter would exceed {limit:e}")]
    Regularization { limit: f64 },

    #[error("budget {k} exceeds the {m} available constraints")]
    BudgetTooLarge { k: usize, m: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("no feasible constraint for any instance")]
    NothingFeasible,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
