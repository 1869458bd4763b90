use thiserror::Error;

/// Errors produced by the library.
///
/// The variants split into two families: problems detectable before any
/// computation starts (`Config`, `Type`, `Validation`, `Parse`,
/// `UnsupportedVersion`) and failures that happen while running (`Numerical`,
/// `Io`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("unsupported schema version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that are detected before any training or simulation
    /// work begins.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerical(_) | Error::Io(_))
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Decodes a JSON document into `T`, reporting the field path of the first
/// mismatch along with the line/column of the failure.
pub(crate) fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse {
            path,
            message: format!("{} (line {}, column {})", inner, inner.line(), inner.column()),
        }
    })
}
