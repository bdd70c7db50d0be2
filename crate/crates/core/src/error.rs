use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("point outside the domain: {0:?}")]
    OutsideDomain(Vec<f64>),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("log-additive noise is undefined for a zero density value")]
    LogOfZero,

    #[error("all weights are zero; normalization is undefined")]
    DegenerateWeights,

    #[error("size error: {0}")]
    Size(String),

    #[error("non-finite numeric value: {0}")]
    NonFinite(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
