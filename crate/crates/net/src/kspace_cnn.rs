use sdl_tensor::{Real, Tensor};

use crate::error::{NetError, Result};
use crate::params::ParamStore;

const IN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct ConvLayer<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    /// Instance-norm affine; absent on the last layer.
    pub norm: Option<(Tensor<T>, Tensor<T>)>,
}

#[derive(Clone, Debug)]
pub struct KcnnParams<T: Real> {
    pub layers: Vec<ConvLayer<T>>,
}

impl<T: Real> KcnnParams<T> {
    pub fn from_store(store: &ParamStore<T>, n_layers: usize) -> Result<Self> {
        let layers = (0..n_layers)
            .map(|l| {
                let norm = match store.maybe(&format!("kcnn.{l}.norm.weight")) {
                    Some(g) => Some((g.clone(), store.get(&format!("kcnn.{l}.norm.bias"))?.clone())),
                    None => None,
                };
                Ok(ConvLayer {
                    weight: store.get(&format!("kcnn.{l}.conv.weight"))?.clone(),
                    bias: store.get(&format!("kcnn.{l}.conv.bias"))?.clone(),
                    norm,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }
}

/// Residual CNN on k-space `[Nc, 2, H, W]`, real and imaginary planes of
/// every coil stacked as `2 Nc` channels. Hidden layers are
/// conv, instance norm, ReLU; the last layer is a bare conv.
pub fn kspace_cnn<T: Real>(y: &Tensor<T>, p: &KcnnParams<T>) -> Result<Tensor<T>> {
    let s = y.shape().to_vec();
    if s.len() != 4 || s[1] != 2 {
        return Err(NetError::Config(format!("k-space CNN expects [nc, 2, h, w], got {s:?}")));
    }
    let x = y.reshape(&[2 * s[0], s[2], s[3]])?;
    let mut h = x.clone();
    for layer in &p.layers {
        h = h.conv2d(&layer.weight, &layer.bias, 1, 1)?;
        if let Some((g, b)) = &layer.norm {
            h = h.instance_norm(g, b, IN_EPS)?.relu();
        }
    }
    Ok(x.add(&h)?.reshape(&s)?)
}
