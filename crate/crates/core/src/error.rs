use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarmexError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested accuracy needs more degrees or levels than allowed.
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HarmexError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarmexError::Domain(msg.into()))
}
