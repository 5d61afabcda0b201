use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {0} has (near) zero l2 norm")]
    ZeroColumn(usize),

    #[error("matrix is {rows}x{cols}; an underdetermined system needs rows < cols")]
    NotUnderdetermined { rows: usize, cols: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("support set is empty")]
    EmptySupport,

    #[error("signal is zero at support index {0}")]
    ZeroOnSupport(usize),

    #[error("threshold must be positive, got {0}")]
    NonpositiveThreshold(f64),

    #[error("non-finite input {0}")]
    NonFinite(f64),

    #[error("invalid threshold rule: {0}")]
    InvalidRule(String),

    #[error("specified sparsity k = {k} must satisfy 1 <= k <= {max}")]
    InvalidK { k: usize, max: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("logarithm argument {0} is not positive")]
    LogDomain(f64),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("incomplete trace: {0}")]
    IncompleteTrace(String),

    #[error("enumeration of {0} supports exceeds the brute-force guard")]
    TooLarge(u128),

    #[error("no support of size <= {0} reproduces y")]
    NoSolution(usize),

    #[error("restricted least-squares system on support {0:?} is singular")]
    SingularRefit(Vec<usize>),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}
