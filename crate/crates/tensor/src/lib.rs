//! Dense tensors with reverse-mode differentiation.
//!
//! Values are row-major, immutable and cheaply cloneable. Operations on
//! tensors that track gradients record a tape; [`Tensor::backward`] on a
//! scalar fills the gradient of every tracked leaf it reaches. Complex fields
//! are planar real tensors `[..., 2, h, w]`.

mod error;
pub mod gradcheck;
pub mod ops;
pub mod par;
mod real;
mod tensor;

pub use error::{Result, TensorError};
pub use ops::{l1_loss, masked_l1_loss};
pub use real::{DType, Real};
pub use tensor::{grad_enabled, no_grad, numel, Tensor};
