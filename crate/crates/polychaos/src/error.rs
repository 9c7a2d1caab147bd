//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violated an operation's precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A point lies outside the support of a marginal distribution.
    #[error("domain error: {0}")]
    Domain(String),

    /// Matrix/vector dimensions do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A requested basis would exceed the supported cardinality.
    #[error("basis too large: {0}")]
    BasisTooLarge(String),

    /// A metric is undefined for the given data (e.g. zero variance).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// No valid sparse model could be constructed.
    #[error("build failure: {0}")]
    BuildFailure(String),

    /// Model (de)serialization problems.
    #[error("model payload: {0}")]
    Payload(String),

    /// Serialized model schema version does not match this crate.
    #[error("unsupported model version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },

    /// Structural configuration errors (e.g. a truss mechanism).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
