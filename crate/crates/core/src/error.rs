use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input structure (dimensions, labels, schema).
    #[error("structural error: {0}")]
    Structural(String),

    /// Input outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed; `diagnostics` carries what was observed.
    #[error("numerical error: {message} ({diagnostics})")]
    Numerical {
        message: String,
        diagnostics: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub fn numerical(message: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Numerical {
            message: message.into(),
            diagnostics: diagnostics.into(),
        }
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Structural(_) => "structural",
            Error::Domain(_) => "domain",
            Error::Numerical { .. } => "numerical",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
