//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shape or dimension disagreement between operators, vectors or spaces.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A NaN or infinity was encountered where a finite number is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A domain invariant was violated (membership, definiteness, constraint shape, ...).
    #[error("validation failed: {0}")]
    Validation(String),

    /// The dense eigensolver did not converge.
    #[error("eigensolver failed (operator 1-norm {norm_one:.6e}): {detail}")]
    Eigensolver { norm_one: f64, detail: String },

    /// S-orthonormalization hit a neutral eigenvector even after the
    /// perturbation fallback; the input cannot be s-unitarily diagonalized
    /// within the requested error budget.
    #[error("neutral degeneracy: {0}")]
    NeutralDegeneracy(String),

    /// A sequence violated the uniform bound required for subsequence extraction.
    #[error("unbounded sequence: {0}")]
    Unbounded(String),

    /// Optimizer-side failure (factorization, non-finite objective, ...).
    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
