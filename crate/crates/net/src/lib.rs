//! The reconstruction network: a k-space CNN, sparse and dense
//! locality-enhanced transformer blocks, and terminal data consistency.

mod attention;
mod block;
mod config;
mod error;
mod kspace_cnn;
mod layout;
mod leff;
mod model;
mod params;

pub use attention::{lew_msa, AttnPlan, MsaParams};
pub use block::{let_block, BlockParams};
pub use config::ModelConfig;
pub use error::{NetError, Result};
pub use kspace_cnn::{kspace_cnn, ConvLayer, KcnnParams};
pub use layout::{crop, reflect_pad, window_merge, window_partition, WindowLayout, WindowMode};
pub use leff::{leff, FfnParams};
pub use model::{sdlformer_forward, Reconstruction, Sdlformer};
pub use params::{init_params, param_count, param_specs, Init, ParamSpec, ParamStore};
