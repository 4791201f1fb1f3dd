use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {msg}")]
    Data { path: PathBuf, msg: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Model(#[from] spatialgp::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn data(path: &Path, msg: impl Into<String>) -> Self {
        CliError::Data { path: path.to_path_buf(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
