use sdl_tensor::{Real, Tensor, TensorError};

use crate::error::{NetError, Result};
use crate::params::ParamStore;

/// Weights of one LeFF layer.
#[derive(Clone, Debug)]
pub struct FfnParams<T: Real> {
    pub fc1_w: Tensor<T>,
    pub fc1_b: Tensor<T>,
    /// Depth-wise `[rC, 1, 3, 3]` kernel and bias.
    pub dw: Option<(Tensor<T>, Tensor<T>)>,
    pub fc2_w: Tensor<T>,
    pub fc2_b: Tensor<T>,
}

impl<T: Real> FfnParams<T> {
    pub fn from_store(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let g = |n: &str| store.get(&format!("{prefix}.{n}")).cloned();
        let dw = match store.maybe(&format!("{prefix}.dwconv.weight")) {
            Some(w) => Some((w.clone(), g("dwconv.bias")?)),
            None => None,
        };
        Ok(Self {
            fc1_w: g("fc1.weight")?,
            fc1_b: g("fc1.bias")?,
            dw,
            fc2_w: g("fc2.weight")?,
            fc2_b: g("fc2.bias")?,
        })
    }
}

/// Feed-forward over image-ordered tokens `[H*W, C]`:
/// linear, GELU, depth-wise 3x3 conv on the re-spatialized hidden map
/// (when `locality`), GELU, linear.
pub fn leff<T: Real>(x: &Tensor<T>, p: &FfnParams<T>, h: usize, w: usize, locality: bool) -> Result<Tensor<T>> {
    if x.ndim() != 2 || x.shape()[0] != h * w {
        return Err(NetError::Tensor(TensorError::Contract(format!(
            "leff expects {} tokens, got shape {:?}",
            h * w,
            x.shape()
        ))));
    }
    let mut a = x.linear(&p.fc1_w, &p.fc1_b)?.gelu();
    if locality {
        let (kw, kb) =
            p.dw.as_ref()
                .ok_or_else(|| NetError::Param("locality enabled but LeFF depth-wise weights are missing".into()))?;
        let hidden = a.shape()[1];
        let spatial = a.transpose2()?.reshape(&[hidden, h, w])?;
        let conv = spatial.conv2d(kw, kb, 1, hidden)?;
        a = conv.reshape(&[hidden, h * w])?.transpose2()?;
    }
    Ok(a.gelu().linear(&p.fc2_w, &p.fc2_b)?)
}
