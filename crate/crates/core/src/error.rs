use thiserror::Error;

/// Errors shared across the library.
///
/// Each variant names the contract it enforces; messages carry enough context
/// to be surfaced verbatim by the CLI as a one-line diagnostic.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid step function: {0}")]
    InvalidStepFunction(String),

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("empty measure: total mass is zero")]
    EmptyMeasure,

    #[error("inadmissible norm spec: {0}")]
    InadmissibleSpec(String),

    #[error("inadmissible K-functional pair: {0}")]
    InadmissiblePair(String),

    #[error("inadmissible (d, p) regime: {0}")]
    InadmissibleRegime(String),

    #[error("operator/parameter regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("input must be non-increasing: {0}")]
    NotNonIncreasing(String),

    #[error("input is not in the admissible class: {0}")]
    NotInLambda(String),

    #[error("dimension parameter out of range: {0}")]
    BadDimension(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
