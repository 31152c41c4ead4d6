use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },

    #[error("computation diverged at iteration {t}")]
    Diverged { t: u64 },

    #[error("random draw {0}")]
    Draw(&'static str),

    #[error("update norm {norm} exceeds quantizer range {limit}")]
    UpdateOutOfRange { norm: f64, limit: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stale refinement base: {0}")]
    StaleRefinement(String),

    #[error("frame {0} is not sealed")]
    UnsealedFrame(u64),

    #[error("frame {0} carries refined updates; those travel as refinement chunks")]
    RefinedFrame(u64),

    #[error("malformed bitstream: {0}")]
    Decode(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("out-of-order append: expected frame {expected}, got {actual}")]
    OutOfOrder { expected: u64, actual: u64 },

    #[error("chain integrity failure at height {height}")]
    Integrity { height: u64 },

    #[error("not verifiable: {0}")]
    NotVerifiable(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
