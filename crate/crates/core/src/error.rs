use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// A problem is well formed but outside what this crate handles.
    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// Marginals of one party depend on the other party's input.
    #[error("signaling error: {0}")]
    Signaling(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("solver error: {0}")]
    Solver(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}
