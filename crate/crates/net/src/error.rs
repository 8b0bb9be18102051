use sdl_mri::MriError;
use sdl_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Mri(#[from] MriError),
    #[error("model config: {0}")]
    Config(String),
    #[error("parameter {0}")]
    Param(String),
}

pub type Result<T> = std::result::Result<T, NetError>;
