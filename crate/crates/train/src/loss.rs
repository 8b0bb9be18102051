use sdl_mri::{apply_forward, CoilSensitivities, ComplexImage, KSpace, SamplingMask};
use sdl_tensor::{l1_loss, masked_l1_loss, Real, Tensor};

use crate::error::{Result, TrainError};

/// Mean absolute error between the prediction's k-space and `y2` over the
/// entries selected by `m2`.
pub fn ssl_loss<T: Real>(x: &ComplexImage<T>, s: &CoilSensitivities<T>, m2: &SamplingMask, y2: &KSpace<T>) -> Result<Tensor<T>> {
    if m2.count() == 0 {
        return Err(TrainError::Config("loss mask is empty".into()));
    }
    let k = apply_forward(x, s, m2)?;
    Ok(masked_l1_loss(k.tensor(), y2.tensor(), &m2.expand(y2.n_coils(), y2.h()))?)
}

/// Mean absolute error over both channels of the complex images.
pub fn supervised_loss<T: Real>(x: &ComplexImage<T>, gt: &ComplexImage<T>) -> Result<Tensor<T>> {
    Ok(l1_loss(x.tensor(), gt.tensor())?)
}
