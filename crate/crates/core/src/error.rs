use thiserror::Error;

/// Errors raised by the simulation and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
  /// An argument or configuration value lies outside its admissible range.
  #[error("invalid parameter: {0}")]
  Parameter(String),

  /// A numerical routine failed to meet its tolerance.
  #[error("numerical failure: {message} (achieved error estimate {achieved:e})")]
  Numerical { message: String, achieved: f64 },

  /// A configuration or data file could not be parsed.
  #[error("parse error at line {line}: {message}")]
  Parse { line: usize, message: String },

  #[error(transparent)]
  Io(#[from] std::io::Error),

  #[error(transparent)]
  Json(#[from] serde_json::Error),
}

impl Error {
  pub(crate) fn param(msg: impl Into<String>) -> Self {
    Error::Parameter(msg.into())
  }

  /// True for errors caused by invalid user input rather than numerics or I/O.
  pub fn is_validation(&self) -> bool {
    matches!(self, Error::Parameter(_) | Error::Parse { .. })
  }
}

pub type Result<T> = std::result::Result<T, Error>;
