pub mod activation;
pub mod complex;
pub mod conv;
pub mod elementwise;
pub mod fft;
pub mod index;
pub mod linalg;
pub mod loss;
pub mod norm;

pub use complex::{cmul, magnitude};
pub use fft::{fft2c_plane, fft2c_planes};
pub use linalg::gemm;
pub use loss::{l1_loss, masked_l1_loss};
