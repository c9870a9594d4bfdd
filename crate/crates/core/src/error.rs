//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by fitting, prediction, sampling, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Cholesky factorization hit a non-positive pivot. `pivot` is the
    /// 1-based index of the first leading principal minor that is not
    /// positive definite.
    #[error("matrix is not positive definite: pivot {pivot} is non-positive")]
    NotPositiveDefinite { pivot: usize },

    #[error("matrix is not symmetric: max |A - A'| = {max_asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { max_asymmetry: f64, tolerance: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("cannot fit on an empty dataset")]
    EmptyData,

    #[error("training data contains a single group; at least two are required")]
    SingleGroup,

    #[error("feature mismatch: {0}")]
    FeatureMismatch(String),

    #[error("csv error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
