//! Command-line harness around the decomposition engine: config parsing,
//! report emission, and the verification suite.

use std::fmt;

pub mod commands;
pub mod config;
pub mod report;
pub mod verify;

/// Failures are split by exit code: configuration problems exit 2, numeric
/// or pipeline problems exit 3, failed verification checks exit 1.
#[derive(Debug)]
pub enum HarnessError {
    Config(String),
    Numeric(String),
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessError::Config(msg) => write!(f, "config error: {msg}"),
            HarnessError::Numeric(msg) => write!(f, "numeric error: {msg}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<decomp_core::Error> for HarnessError {
    fn from(e: decomp_core::Error) -> Self {
        HarnessError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Numeric(format!("io: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
