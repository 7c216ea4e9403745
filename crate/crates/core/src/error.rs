use thiserror::Error;

#[derive(Debug, Error)]
pub enum WcoError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("unknown atom id `{0}`")]
    UnknownAtom(String),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WcoError> = std::result::Result<T, E>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(WcoError::Input(msg.into()))
}
