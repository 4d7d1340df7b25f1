use thiserror::Error;

use crate::vsm::FeatureSpace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    /// A record violates a structural invariant (cycle, duplicate, dangling reference).
    #[error("validation error in {record}: {reason}")]
    Validation { record: String, reason: String },

    #[error("unknown type '{0}'")]
    UnknownType(String),

    #[error("unknown entity identifier '{0}'")]
    UnknownEntity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feature space mismatch: {left} vs {right}")]
    SpaceMismatch { left: FeatureSpace, right: FeatureSpace },
}

impl Error {
    pub(crate) fn validation(record: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            record: record.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors caused by caller-supplied parameters rather than input data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}
