use thiserror::Error;

/// Problems with the input data or with how the library was called.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("no observations")]
    Empty,
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("need at least 2 covariates (one free plus the anchor), got {0}")]
    TooFewCovariates(usize),
    #[error("row {row}: expected {expected} covariates, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: {field} value {value:?} is not a finite number")]
    NotNumeric {
        row: usize,
        field: String,
        value: String,
    },
    #[error("row {row}: {field} is not finite")]
    NonFinite { row: usize, field: String },
    #[error("row {row}: censoring indicator {value:?} is not one of 0/1/true/false")]
    BadIndicator { row: usize, value: String },
    #[error("parameter vector has {found} entries, dataset needs {expected}")]
    ParamLength { expected: usize, found: usize },
    #[error("parameter entry {0} is not finite")]
    ParamNotFinite(usize),
    #[error("{0}")]
    Invalid(String),
}

/// Numerical diagnostics raised by the linear algebra and the estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericalError {
    #[error("matrix is {rows}x{cols}, expected square {expected}x{expected}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("matrix is not symmetric (entry ({row},{col}) differs by {gap:e})")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is numerically singular (1-norm condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
}

/// Top-level error for estimation and simulation entry points.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Numerical(#[from] NumericalError),
    #[error("all {reps} replications failed")]
    AllReplicationsFailed { reps: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
