use std::io;

use thiserror::Error;

use crate::engine::Trace;

pub type Result<T> = std::result::Result<T, AcdError>;

#[derive(Debug, Error)]
pub enum AcdError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at update {update}: {what}")]
    NonFinite { update: u64, what: String },

    #[error("corrupt trace: {0}")]
    CorruptTrace(String),

    #[error("enforcement failure: {0}")]
    Enforcement(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("worker failure: {0}")]
    Worker(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// An engine run stopped early; `partial` holds the dense prefix of commits.
    #[error("run aborted: {reason}")]
    Aborted { reason: String, partial: Box<Trace> },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl AcdError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        AcdError::InvalidParameter(msg.into())
    }
}
