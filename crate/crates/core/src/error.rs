use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The n^p expansion does not fit in the configured memory cap.
    #[error(
        "expansion too large: n^p = {count} ({n}^{p}) needs an estimated {required_bytes} bytes, cap is {cap_bytes} bytes"
    )]
    BudgetExceeded {
        n: usize,
        p: usize,
        count: u128,
        required_bytes: u128,
        cap_bytes: u64,
    },

    #[error("allocation of {bytes} bytes exceeds the {cap_bytes} byte cap")]
    AllocationTooLarge { bytes: u128, cap_bytes: u64 },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is singular (pivot {pivot})")]
    Singular { pivot: usize },

    #[error("matrix is not symmetric: |a_ij - a_ji| = {deviation:e} at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize, deviation: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("timer misuse: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for failures of the arithmetic itself (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::Singular { .. }
                | Error::BudgetExceeded { .. }
                | Error::AllocationTooLarge { .. }
        )
    }
}
