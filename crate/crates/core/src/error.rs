use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the decomposition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("wrong number of items: {0}")]
    Arity(String),

    #[error("invalid rank: {0}")]
    Rank(String),

    #[error("numerical failure: {0}")]
    Numerics(String),

    #[error("no alpha candidate with the requested sign at stage {stage}")]
    SignSelection { stage: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::EmptyInput(_) => "EmptyInput",
            Error::Shape(_) => "ShapeError",
            Error::Arity(_) => "ArityError",
            Error::Rank(_) => "RankError",
            Error::Numerics(_) => "NumericsError",
            Error::SignSelection { .. } => "SignSelectionError",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
            Error::Json(_) => "JsonError",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
