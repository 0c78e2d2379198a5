use thiserror::Error;

/// Errors raised by the library. Mathematical falsification (a monitor trip)
/// is not an error of the library and is reported through
/// [`crate::integrate::Termination`] instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolitonError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid shooting parameters: {0}")]
    Params(String),
    #[error("h too large: {0}")]
    ChartRejected(String),
    #[error("invalid integration controls: {0}")]
    Controls(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("asymptotic regime not reached: {0}")]
    Regime(String),
}

pub type Result<T> = std::result::Result<T, SolitonError>;
