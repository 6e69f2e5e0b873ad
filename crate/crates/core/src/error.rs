use thiserror::Error;

/// Errors raised across the estimation and experiment pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported Daubechies order {0} (expected 2, 3 or 4)")]
    UnsupportedOrder(usize),

    #[error("invalid refinement filter: {0}")]
    InvalidFilter(String),

    #[error("translate {k} out of range 1..={max}")]
    TranslateOutOfRange { k: usize, max: usize },

    #[error("quadrature did not converge after depth {0}")]
    QuadratureDidNotConverge(u32),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("tie in column {column} with tie policy 'reject'")]
    TieRejected { column: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("level {level} in dimension {dim} exceeds the memory guard 2^(j*d) <= 2^26")]
    LevelTooLarge { level: u32, dim: usize },

    #[error("invalid copula parameter: {0}")]
    InvalidParameter(String),

    #[error("copula density of {0} is unbounded")]
    Unbounded(String),

    #[error("density evaluated on the boundary of an unbounded model")]
    BoundaryEvaluation,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the error stems from user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::QuadratureDidNotConverge(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
