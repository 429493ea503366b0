//! Crate-wide error type.

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not line up; the message names both shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation was invoked in an invalid sequence (e.g. a second
    /// backward pass over a consumed tape).
    #[error("invalid state: {0}")]
    State(String),

    /// A non-finite value surfaced where a finite one is required; the
    /// message names the offending quantity.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A configuration key is missing, unknown, or malformed.
    #[error("config error: {0}")]
    Config(String),

    /// A cell of an input file failed to parse.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    /// An input file is structurally malformed (e.g. ragged rows).
    #[error("format error: {0}")]
    Format(String),

    /// The data itself is unusable (e.g. a constant series cannot be
    /// standardized).
    #[error("data error: {0}")]
    Data(String),

    /// A value is outside a metric's domain; the message identifies where.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
