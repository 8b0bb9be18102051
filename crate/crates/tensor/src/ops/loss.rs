use crate::error::{config_err, shape_err, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Mean absolute difference over all elements.
pub fn l1_loss<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.same_shape(b, "l1_loss")?;
    Ok(a.sub(b)?.abs().mean())
}

/// Sum of `|a - b|` over positions where `mask` is set, divided by the
/// number of such positions.
pub fn masked_l1_loss<T: Real>(a: &Tensor<T>, b: &Tensor<T>, mask: &[bool]) -> Result<Tensor<T>> {
    a.same_shape(b, "masked_l1_loss")?;
    if mask.len() != a.numel() {
        return shape_err("masked_l1_loss", a.shape(), &[mask.len()]);
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return config_err("masked_l1_loss", "mask selects no entries");
    }
    let weights: Vec<T> = mask.iter().map(|&m| if m { T::one() } else { T::zero() }).collect();
    Ok(a.sub(b)?.mul_const(&weights)?.abs().sum().scale(T::one() / T::of(count as f64)))
}
