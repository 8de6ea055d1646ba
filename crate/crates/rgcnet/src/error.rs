//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any rgcnet operation.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not conform; names the operation and both shapes.
    #[error("dimension mismatch in {op}: left is {lhs}, right is {rhs}")]
    Dimension {
        op: &'static str,
        lhs: String,
        rhs: String,
    },

    /// An argument is outside its allowed range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input violates a mathematical precondition (negative weights, empty graph, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced NaN/Inf or failed to converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An API contract was violated (non-scalar loss, label out of range, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Model or experiment configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A dataset could not be read or parsed.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A cross-validation split cannot be stratified.
    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dimension(op: &'static str, lhs: impl Into<String>, rhs: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.into(),
            rhs: rhs.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
