use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid infection rate at t = {time}: {value}")]
    InvalidRate { time: f64, value: f64 },

    #[error("invalid data at transition {index}: {reason}")]
    InvalidData { index: usize, reason: String },

    #[error("degenerate diffusion transition {index}: {reason}")]
    DegenerateTransition { index: usize, reason: String },

    #[error("all Monte-Carlo sub-paths invalid for transition {index}")]
    MonteCarloDegenerate { index: usize },

    #[error("objective is not finite at the initial parameters")]
    Initialization,

    #[error("model selection failed: every candidate fit failed")]
    Selection,

    #[error("bootstrap produced no usable replicates after {attempts} attempts")]
    BootstrapShortfall { attempts: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
