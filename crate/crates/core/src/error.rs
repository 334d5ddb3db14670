use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("overflow evaluating matrix function: {0}")]
    Overflow(String),

    #[error("conditioning failed after {attempts} rejections (norm cap {norm_cap})")]
    ConditioningFailure { attempts: usize, norm_cap: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("instance too large for exhaustive enumeration: {0}")]
    InstanceTooLarge(String),

    #[error("truncation too lossy: eta - sqrt(C (1 - p)) = {0} is not positive")]
    TruncationTooLossy(f64),

    #[error("bound is vacuous: (2 delta)^n / n! = {0} exceeds 1")]
    BoundVacuous(f64),

    #[error("domain violation: {0}")]
    DomainViolation(String),

    #[error("no data: {0}")]
    EmptyData(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config schema error for key `{key}`: {msg}")]
    Schema { key: String, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
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
