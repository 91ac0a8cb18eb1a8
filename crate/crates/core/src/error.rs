//! Error taxonomy shared by all modules.
//!
//! Three failure classes are distinguished because they map to different
//! CLI exit codes and different user actions:
//!
//! * [`Error::Validation`]: the inputs violate a documented precondition
//!   (fix the configuration).
//! * [`Error::Diagnostic`]: the inputs were admissible but a numerical
//!   procedure could not certify its result (retry with different
//!   parameters; the message names the offending quantity).
//! * [`Error::Resource`]: the request exceeds a hard memory or size budget.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// A numerical procedure failed to converge or certify its output.
    #[error("numerical diagnostic: {0}")]
    Diagnostic(String),

    /// Request exceeds a memory or dimension budget.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Usage error (bad flags, missing files, unknown stage names).
    #[error("usage: {0}")]
    Usage(String),

    /// Underlying I/O failure while reading inputs or writing outputs.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 usage, 3 validation, 4 diagnostic.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Io(_) => 2,
            Error::Validation(_) | Error::Resource(_) => 3,
            Error::Diagnostic(_) => 4,
        }
    }
}

/// Shorthand constructor for validation errors.
pub fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

/// Shorthand constructor for diagnostic errors.
pub fn diagnostic<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Diagnostic(msg.into()))
}
