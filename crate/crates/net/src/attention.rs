use std::sync::Arc;

use sdl_tensor::{Real, Tensor, TensorError};

use crate::error::{NetError, Result};
use crate::params::ParamStore;

/// Precomputed gather indices for one `(windows, M, C, heads)` geometry.
#[derive(Clone, Debug)]
pub struct AttnPlan {
    pub n_windows: usize,
    pub m: usize,
    pub c: usize,
    pub heads: usize,
    q: Arc<Vec<usize>>,
    k: Arc<Vec<usize>>,
    v: Arc<Vec<usize>>,
    v_spatial: Arc<Vec<usize>>,
    spatial_to_tokens: Arc<Vec<usize>>,
    merge_heads: Arc<Vec<usize>>,
    rel_bias: Arc<Vec<usize>>,
}

impl AttnPlan {
    pub fn new(n_windows: usize, m: usize, c: usize, heads: usize) -> Result<Self> {
        if heads == 0 || !c.is_multiple_of(heads) {
            return Err(NetError::Config(format!("{c} channels do not split into {heads} heads")));
        }
        let (l, d) = (m * m, c / heads);
        let split = |part: usize| {
            let mut idx = Vec::with_capacity(n_windows * l * c);
            for w in 0..n_windows {
                for hd in 0..heads {
                    for t in 0..l {
                        for j in 0..d {
                            idx.push((w * l + t) * 3 * c + part * c + hd * d + j);
                        }
                    }
                }
            }
            Arc::new(idx)
        };
        let mut v_spatial = Vec::with_capacity(n_windows * l * c);
        let mut spatial_to_tokens = vec![0; n_windows * l * c];
        for w in 0..n_windows {
            for ch in 0..c {
                for t in 0..l {
                    v_spatial.push((w * l + t) * 3 * c + 2 * c + ch);
                    spatial_to_tokens[(w * l + t) * c + ch] = (w * c + ch) * l + t;
                }
            }
        }
        let mut merge_heads = vec![0; n_windows * l * c];
        for w in 0..n_windows {
            for hd in 0..heads {
                for t in 0..l {
                    for j in 0..d {
                        merge_heads[(w * l + t) * c + hd * d + j] = ((w * heads + hd) * l + t) * d + j;
                    }
                }
            }
        }
        let span = 2 * m - 1;
        let mut rel_bias = Vec::with_capacity(heads * l * l);
        for hd in 0..heads {
            for i in 0..l {
                for j in 0..l {
                    let dr = i / m + m - 1 - j / m;
                    let dc = i % m + m - 1 - j % m;
                    rel_bias.push((dr * span + dc) * heads + hd);
                }
            }
        }
        Ok(Self {
            n_windows,
            m,
            c,
            heads,
            q: split(0),
            k: split(1),
            v: split(2),
            v_spatial: Arc::new(v_spatial),
            spatial_to_tokens: Arc::new(spatial_to_tokens),
            merge_heads: Arc::new(merge_heads),
            rel_bias: Arc::new(rel_bias),
        })
    }

    pub fn window_len(&self) -> usize {
        self.m * self.m
    }

    pub fn head_dim(&self) -> usize {
        self.c / self.heads
    }
}

/// Weights of one LeW-MSA layer.
#[derive(Clone, Debug)]
pub struct MsaParams<T: Real> {
    /// `[C, 3C]`, columns ordered Q | K | V.
    pub qkv_w: Tensor<T>,
    pub qkv_b: Tensor<T>,
    /// Relative position table `[(2M-1)^2, heads]`.
    pub rel_bias: Tensor<T>,
    /// Depth-wise `[C, 1, 3, 3]` kernel and bias of the LCM.
    pub lcm: Option<(Tensor<T>, Tensor<T>)>,
    pub proj_w: Tensor<T>,
    pub proj_b: Tensor<T>,
}

impl<T: Real> MsaParams<T> {
    pub fn from_store(store: &ParamStore<T>, prefix: &str) -> Result<Self> {
        let g = |n: &str| store.get(&format!("{prefix}.{n}")).cloned();
        let lcm = match store.maybe(&format!("{prefix}.lcm.weight")) {
            Some(w) => Some((w.clone(), g("lcm.bias")?)),
            None => None,
        };
        Ok(Self {
            qkv_w: g("qkv.weight")?,
            qkv_b: g("qkv.bias")?,
            rel_bias: g("rel_bias")?,
            lcm,
            proj_w: g("proj.weight")?,
            proj_b: g("proj.bias")?,
        })
    }
}

/// Window attention `softmax(Q K^T / sqrt(d) + B) V`, plus the LCM term
/// when `locality` is set, heads concatenated and projected.
///
/// `xw` is `[nWin, M*M, C]`; the output has the same shape.
pub fn lew_msa<T: Real>(xw: &Tensor<T>, p: &MsaParams<T>, plan: &AttnPlan, locality: bool) -> Result<Tensor<T>> {
    let (nw, l, c, h, d) = (plan.n_windows, plan.window_len(), plan.c, plan.heads, plan.head_dim());
    if xw.shape() != [nw, l, c] {
        return Err(NetError::Tensor(TensorError::Shape {
            op: "lew_msa",
            lhs: xw.shape().to_vec(),
            rhs: vec![nw, l, c],
        }));
    }
    let x = xw.reshape(&[nw * l, c])?;
    let qkv = x.linear(&p.qkv_w, &p.qkv_b)?;
    let heads_shape = [nw * h, l, d];
    let q = qkv.gather(Arc::clone(&plan.q), &heads_shape)?;
    let k = qkv.gather(Arc::clone(&plan.k), &heads_shape)?;
    let v = qkv.gather(Arc::clone(&plan.v), &heads_shape)?;

    let bias = p.rel_bias.gather(Arc::clone(&plan.rel_bias), &[h, l, l])?;
    let scores = q.bmm(&k, true)?.scale(T::of(1.0 / (d as f64).sqrt())).add_head_bias(&bias)?;
    let attn = scores.softmax_last()?.bmm(&v, false)?;
    let mut out = attn.gather(Arc::clone(&plan.merge_heads), &[nw * l, c])?;

    if locality {
        let (kw, kb) = p
            .lcm
            .as_ref()
            .ok_or_else(|| NetError::Param("locality enabled but LCM weights are missing".into()))?;
        let v_img = qkv.gather(Arc::clone(&plan.v_spatial), &[nw, c, plan.m, plan.m])?;
        let local = v_img.conv2d(kw, kb, 1, c)?;
        out = out.add(&local.gather(Arc::clone(&plan.spatial_to_tokens), &[nw * l, c])?)?;
    }
    Ok(out.linear(&p.proj_w, &p.proj_b)?.reshape(&[nw, l, c])?)
}
