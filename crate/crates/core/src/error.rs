use thiserror::Error;

/// Errors surfaced by the learning stack.
#[derive(Debug, Error)]
pub enum MlshError {
    /// A caller broke a precondition (shape, range, missing state).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A non-finite value appeared in a loss or gradient; nothing was applied.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed checkpoint or metrics input.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MlshError> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> MlshError {
    MlshError::Contract(msg.into())
}
