use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    /// Operand shapes are incompatible for the named operation.
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// Operation parameters are inconsistent (groups, kernel size, ...).
    #[error("{op}: invalid configuration: {msg}")]
    Config { op: &'static str, msg: String },
    /// A call violated a usage contract (e.g. backward on a non-scalar).
    #[error("contract violated: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn shape_err<T>(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Result<T> {
    Err(TensorError::Shape {
        op,
        lhs: lhs.to_vec(),
        rhs: rhs.to_vec(),
    })
}

pub(crate) fn config_err<T>(op: &'static str, msg: impl Into<String>) -> Result<T> {
    Err(TensorError::Config { op, msg: msg.into() })
}
