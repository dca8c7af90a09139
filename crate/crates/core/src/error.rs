use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem instance: {0}")]
    Instance(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("graph schedule construction failed: {0}")]
    Schedule(String),

    #[error("invalid weight matrix: {0}")]
    Weights(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed PGM at byte {offset}: {reason}")]
    Pgm { offset: usize, reason: String },

    #[error("image error: {0}")]
    Image(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
