//! Cartesian multi-coil MRI acquisition.
//!
//! Images and k-space use the planar complex layout of `sdl-tensor`:
//! `[2, H, W]` for an image and `[Nc, 2, H, W]` for per-coil data.

mod error;
mod forward;
mod mask;
mod phantom;
pub mod seed;
pub mod slice_file;
mod types;

pub use error::{MriError, Result};
pub use forward::{apply_forward, coil_combine, data_consistency, data_consistency_kspace, mask_kspace, zero_filled};
pub use mask::{default_acs_frac, make_mask, split_mask, split_mask_retry, SamplingMask, SplitMasks};
pub use phantom::{make_coils, make_phantom};
pub use slice_file::SliceFile;
pub use types::{magnitude_image, CoilSensitivities, ComplexImage, KSpace};
