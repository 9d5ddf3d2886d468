use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported model `{model}`: {reason}")]
    UnsupportedModel { model: String, reason: &'static str },

    /// The quality integral behind the fixed-point map is infinite at this `W`.
    #[error("quality integral diverges at W = {w}")]
    Divergence { w: f64 },

    #[error("no candidate target with positive weight")]
    NoTarget,

    #[error("no estimate: {0}")]
    NoEstimate(String),

    #[error("edge log is empty")]
    EmptyLog,

    #[error("invalid edge log: {0}")]
    InvalidLog(String),

    #[error("unknown page {0}")]
    UnknownPage(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no exponential decay: fitted slope is non-negative")]
    NoDecay,

    #[error("root search did not converge: {0}")]
    NoConvergence(String),
}
