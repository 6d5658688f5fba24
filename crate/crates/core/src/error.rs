use alloc::string::String;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table too small: {rows} rows x {cols} columns, need at least 2 x 2")]
    TooSmall { rows: usize, cols: usize },
    #[error("degenerate column {0}: fewer than two distinct values")]
    DegenerateColumn(usize),
    #[error("column {0} is not discrete")]
    NotDiscrete(usize),
    #[error("column {0} is not continuous")]
    NotContinuous(usize),
    #[error("q = {q} out of range 1..={p}")]
    QOutOfRange { q: usize, p: usize },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("joint distribution disagrees with its marginals by {0:e}")]
    InconsistentMarginals(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("schema mismatch in column {column}: {reason}")]
    SchemaMismatch { column: usize, reason: String },
    #[error("requested covariance is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("eigen solver did not converge")]
    NoConvergence,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Non-fatal conditions recorded during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The coordinate update had a zero-norm direction; the previous transform
    /// was kept. Only the first occurrence per variable is recorded.
    DegenerateUpdate { iteration: usize, variable: usize },
    /// Some of the top-q eigenvalues of K were not simple (gap below 1e-10).
    /// Only the first iteration where this happened is recorded.
    NonSimpleEigenvalues { iteration: usize },
    /// A block of the leading eigenvector of R vanished; an arbitrary feasible
    /// unit vector was substituted.
    DegenerateRankOneBlock { variable: usize },
    /// Duplicate or empty discretization cells were merged.
    MergedKnots {
        column: usize,
        requested: usize,
        effective: usize,
    },
}
