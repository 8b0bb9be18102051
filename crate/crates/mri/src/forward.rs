use sdl_tensor::Real;

use crate::error::{config, Result};
use crate::mask::SamplingMask;
use crate::types::{CoilSensitivities, ComplexImage, KSpace};

fn check_mask(m: &SamplingMask, w: usize) -> Result<()> {
    if m.width() != w {
        return config(format!("mask width {} does not match k-space width {w}", m.width()));
    }
    Ok(())
}

/// `y_i = M * F(S_i * x)` for every coil.
pub fn apply_forward<T: Real>(x: &ComplexImage<T>, s: &CoilSensitivities<T>, m: &SamplingMask) -> Result<KSpace<T>> {
    check_mask(m, s.w())?;
    let k = x.tensor().coil_expand(s.tensor())?.fft2c()?;
    let masked = k.mul_const(&m.weights(s.n_coils(), s.h()))?;
    KSpace::new(masked)
}

/// Adjoint of the unmasked forward model, `sum_i conj(S_i) * F^-1(y_i)`.
pub fn coil_combine<T: Real>(y: &KSpace<T>, s: &CoilSensitivities<T>) -> Result<ComplexImage<T>> {
    ComplexImage::new(y.tensor().ifft2c()?.coil_reduce(s.tensor())?)
}

/// Coil-combined reconstruction of already-masked k-space, missing entries
/// left at zero.
pub fn zero_filled<T: Real>(y: &KSpace<T>, s: &CoilSensitivities<T>) -> Result<ComplexImage<T>> {
    coil_combine(y, s)
}

/// Per-coil k-space of `x_pred` with the sampled entries replaced by the
/// measurements. Gradients reach `x_pred` only through unsampled entries.
pub fn data_consistency_kspace<T: Real>(
    x_pred: &ComplexImage<T>,
    y_meas: &KSpace<T>,
    s: &CoilSensitivities<T>,
    m: &SamplingMask,
) -> Result<KSpace<T>> {
    check_mask(m, s.w())?;
    let k = x_pred.tensor().coil_expand(s.tensor())?.fft2c()?;
    k.same_shape(y_meas.tensor(), "data_consistency")?;
    let replaced = k.masked_replace(y_meas.tensor().data(), &m.expand(s.n_coils(), s.h()))?;
    KSpace::new(replaced)
}

/// Hard data consistency followed by coil combination.
pub fn data_consistency<T: Real>(
    x_pred: &ComplexImage<T>,
    y_meas: &KSpace<T>,
    s: &CoilSensitivities<T>,
    m: &SamplingMask,
) -> Result<ComplexImage<T>> {
    coil_combine(&data_consistency_kspace(x_pred, y_meas, s, m)?, s)
}

/// `M * y` for every coil.
pub fn mask_kspace<T: Real>(y: &KSpace<T>, m: &SamplingMask) -> Result<KSpace<T>> {
    check_mask(m, y.w())?;
    KSpace::new(y.tensor().mul_const(&m.weights(y.n_coils(), y.h()))?)
}
