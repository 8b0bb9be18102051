use sdl_tensor::{Real, Tensor};

use crate::attention::{lew_msa, AttnPlan, MsaParams};
use crate::error::Result;
use crate::layout::{window_merge, window_partition, WindowLayout};
use crate::leff::{leff, FfnParams};
use crate::params::ParamStore;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct BlockParams<T: Real> {
    /// Layer norm before attention; `None` gives the literal `X' = MSA(X) + X`.
    pub norm1: Option<(Tensor<T>, Tensor<T>)>,
    pub msa: MsaParams<T>,
    pub norm2: (Tensor<T>, Tensor<T>),
    pub ffn: FfnParams<T>,
}

impl<T: Real> BlockParams<T> {
    pub fn from_store(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let norm = |n: &str| -> Result<(Tensor<T>, Tensor<T>)> {
            Ok((
                store.get(&format!("{prefix}.{n}.weight"))?.clone(),
                store.get(&format!("{prefix}.{n}.bias"))?.clone(),
            ))
        };
        let norm1 = if store.contains(&format!("{prefix}.norm1.weight")) {
            Some(norm("norm1")?)
        } else {
            None
        };
        Ok(Self {
            norm1,
            msa: MsaParams::from_store(store, &format!("{prefix}.msa"))?,
            norm2: norm("norm2")?,
            ffn: FfnParams::from_store(store, &format!("{prefix}.ffn"))?,
        })
    }
}

/// `[C, H, W]` to image-ordered tokens `[H*W, C]`.
fn to_tokens<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape();
    Ok(x.reshape(&[s[0], s[1] * s[2]])?.transpose2()?)
}

/// Locality-enhanced transformer block on `[C, H, W]`:
/// `X' = LeWMSA(LN(X)) + X`, `X_out = LeFF(LN(X')) + X'`, with windows
/// gathered according to `layout`.
pub fn let_block<T: Real>(x: &Tensor<T>, layout: &WindowLayout, plan: &AttnPlan, p: &BlockParams<T>, locality: bool) -> Result<Tensor<T>> {
    let (c, h, w) = (x.shape()[0], layout.h, layout.w);
    let xw = window_partition(x, layout)?;
    let (nw, l) = (layout.n_windows(), layout.window_len());
    let xw = match &p.norm1 {
        Some((g, b)) => xw.reshape(&[nw * l, c])?.layer_norm(g, b, LN_EPS)?.reshape(&[nw, l, c])?,
        None => xw,
    };
    let attn = lew_msa(&xw, &p.msa, plan, locality)?;
    let x1 = x.add(&window_merge(&attn, layout)?)?;

    let t = to_tokens(&x1)?.layer_norm(&p.norm2.0, &p.norm2.1, LN_EPS)?;
    let f = leff(&t, &p.ffn, h, w, locality)?;
    Ok(x1.add(&f.transpose2()?.reshape(&[c, h, w])?)?)
}
