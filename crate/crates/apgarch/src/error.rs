//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the estimation, diagnostic and I/O layers.
#[derive(Error, Debug)]
pub enum Error {
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("omega component {index} is {value}, must be strictly positive")]
    InvalidOmega { index: usize, value: f64 },

    #[error("{block} coefficient ({row},{col}) is {value}, must be nonnegative")]
    NegativeCoefficient {
        block: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("invalid correlation parameter: {0}")]
    InvalidCorrelation(String),

    #[error("delta component {index} is {value}, must be strictly positive")]
    InvalidDelta { index: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("volatility recursion exploded at t={t} (h^(delta/2) left (0, 1e300])")]
    NumericOverflow { t: usize },

    #[error("operation requires p+q >= 1")]
    DegenerateOrder,

    #[error("delta derivatives requested but the power mode is KnownDelta")]
    ModeMismatch,

    #[error("optimizer did not converge after {iterations} iterations (gradient max-norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        last_iterate: Box<crate::model::Params>,
    },

    #[error(
        "J matrix is numerically singular (condition number {cond:e}); fit may be unidentified"
    )]
    SingularJ { cond: f64 },

    #[error("D matrix is numerically singular (condition number {cond:e}); {advisory}")]
    SingularD { cond: f64, advisory: String },

    #[error("lag m={m} must satisfy 1 <= m < n={n}")]
    LagTooLarge { m: usize, n: usize },

    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),

    #[error("cannot parse cell at row {row}, column {column:?}: {value:?}")]
    ParseError {
        row: usize,
        column: String,
        value: String,
    },

    #[error("no usable observations after loading")]
    EmptySeries,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
