//! CLI error type with machine-parseable categories.

use std::fmt;

/// An error with a stable one-word category, printed as a single line
/// `error: <category>: <message>` before a nonzero exit.
#[derive(Debug)]
pub struct CliError {
    pub category: String,
    pub message: String,
}

impl CliError {
    pub fn new(category: &str, message: impl Into<String>) -> Self {
        Self {
            category: category.into(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new("data", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new("io", message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl From<senbd::Error> for CliError {
    fn from(err: senbd::Error) -> Self {
        Self::new(err.category(), err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::io(err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
