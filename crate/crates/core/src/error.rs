//! Error type shared by all modules.

use thiserror::Error;

/// Errors produced by the library.
///
/// The CLI maps these to process exit codes: configuration, domain, shape,
/// frame, unsupported and dependency errors are usage errors (exit 1), while
/// numerical failures exit 2.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix or vector dimensions are inconsistent.
    #[error("shape error: {0}")]
    Shape(String),

    /// A circle frame is not orthonormal within tolerance.
    #[error("frame error: {0}")]
    Frame(String),

    /// The requested parameter combination is excluded by the theory
    /// (for example the maximal-codimension case r = n for I_{n,r}).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Configuration file or flag validation failure.
    #[error("config error: {0}")]
    Config(String),

    /// A required input artifact (such as an I_{n,r} estimate file) is missing.
    #[error("dependency error: {0}")]
    Dependency(String),

    /// Numerical failure at run time (estimator breakdown, reproduction mismatch).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
