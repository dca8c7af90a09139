use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ddl_core::Error),

    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("cannot read {0}: {1}")]
    Read(PathBuf, #[source] std::io::Error),

    #[error("cannot write {0}: {1}")]
    Write(PathBuf, #[source] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
