use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvsimError {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, EvsimError>;

impl EvsimError {
    pub fn contract(msg: impl Into<String>) -> Self {
        EvsimError::Contract(msg.into())
    }

    pub fn scenario(msg: impl Into<String>) -> Self {
        EvsimError::Scenario(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        EvsimError::Parse(msg.into())
    }
}
