use thiserror::Error;

use crate::params::ModelParams;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of records, parameters and schema disagree.
    #[error("schema error: {0}")]
    Schema(String),

    /// A record or parameter violates a value constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// The caller asked for something that makes no sense (empty batch, bad flag...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    /// An operation that is not defined for the units in this schema.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format version mismatch: file has {kind} version {found}, this build reads version {expected}")]
    Version {
        kind: &'static str,
        found: String,
        expected: u32,
    },

    /// Training produced a non-finite parameter. Carries the last finite parameters.
    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        checkpoint: Box<ModelParams>,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Schema(_)
            | Error::Validation(_)
            | Error::Unsupported(_)
            | Error::Parse { .. }
            | Error::Version { .. }
            | Error::Io(_) => 2,
            Error::Diverged { .. } | Error::Numeric(_) => 3,
        }
    }
}
