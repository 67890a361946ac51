use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("component index {index} out of range for {len} components")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem does not expose a composite local model")]
    NotComposite,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stepsize {mu} must be below 1/tau = {limit} for a strongly convex subproblem")]
    StepTooLarge { mu: f64, limit: f64 },

    #[error("inner solver stopped after {iterations} iterations with residual {residual:e}")]
    InnerSolverCap { iterations: usize, residual: f64 },

    #[error("too few records: need {need}, have {have}")]
    TooFewRecords { need: usize, have: usize },

    #[error("subgradient bound estimate is zero; the Lipschitz constant must be positive")]
    ZeroLipschitz,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
