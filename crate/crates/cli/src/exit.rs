//! Exit codes and the error type that carries them.

use std::fmt;

use soliton_core::SolitonError;

pub const OK: u8 = 0;
/// Unreadable or invalid input.
pub const CONFIG: u8 = 1;
/// A proved inequality failed, or the start point was rejected.
pub const VIOLATION: u8 = 2;
/// The integrator gave up.
pub const INTEGRATION: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(CONFIG, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<SolitonError> for CliError {
    fn from(e: SolitonError) -> Self {
        let code = match e {
            SolitonError::ChartRejected(_) => VIOLATION,
            SolitonError::Integration(_) => INTEGRATION,
            _ => CONFIG,
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
