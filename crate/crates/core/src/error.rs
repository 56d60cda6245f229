use alloc::string::String;

use crate::id::ArgumentId;

/// Errors raised when constructing or mutating a [`Qbaf`](crate::Qbaf).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QbafError {
    #[error("invalid argument id {0:?}: expected 1-64 characters from [A-Za-z0-9_-]")]
    InvalidId(String),
    #[error("argument text must not be empty")]
    EmptyText,
    #[error("argument text has {0} characters, the limit is {max}", max = crate::MAX_TEXT_CHARS)]
    TextTooLong(usize),
    #[error("base score {0} is outside [0, 1]")]
    InvalidScore(f64),
    #[error("edge from {0} to itself")]
    SelfLoop(ArgumentId),
    #[error("argument {0} appears more than once")]
    DuplicateArgument(ArgumentId),
    #[error("unknown parent argument {0}")]
    UnknownParent(ArgumentId),
    #[error("unknown argument {0}")]
    UnknownArgument(ArgumentId),
    #[error("argument {parent} is at depth {depth}; children would exceed the depth limit")]
    DepthLimitExceeded { parent: ArgumentId, depth: usize },
    #[error("argument {0} is not connected to the root by a parent chain")]
    NotATree(ArgumentId),
}

impl QbafError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            QbafError::InvalidId(_) => "invalid-id",
            QbafError::EmptyText | QbafError::TextTooLong(_) => "invalid-text",
            QbafError::InvalidScore(_) => "invalid-score",
            QbafError::SelfLoop(_) => "self-loop",
            QbafError::DuplicateArgument(_) => "duplicate-argument",
            QbafError::UnknownParent(_) => "unknown-parent",
            QbafError::UnknownArgument(_) => "unknown-argument",
            QbafError::DepthLimitExceeded { .. } => "depth-limit-exceeded",
            QbafError::NotATree(_) => "not-a-tree",
        }
    }
}
