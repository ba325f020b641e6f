use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("{bits} bits cannot be computed in a window of {window} s")]
    InfeasibleWindow { bits: f64, window: f64 },

    #[error("dual point outside the dual domain: {0}")]
    DualInfeasible(String),

    #[error("ellipsoid oracle returned a zero cut vector")]
    DegenerateCut,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
