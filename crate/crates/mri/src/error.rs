use sdl_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MriError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{0}")]
    Config(String),
    /// The split left the loss mask empty; retry with another seed.
    #[error("split produced an empty loss mask (seed {seed})")]
    EmptySplit { seed: u64 },
    #[error("slice file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MriError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(MriError::Config(msg.into()))
}
