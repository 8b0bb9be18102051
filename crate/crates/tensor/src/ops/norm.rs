use std::sync::Arc;

use crate::error::{config_err, shape_err, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Standardizes contiguous runs of `len` values, then applies
/// `affine(run, position)` as `(gamma, beta)`.
///
/// Returns `(out, xhat, inv_std)`.
fn normalize<T: Real>(x: &[T], len: usize, eps: T, affine: impl Fn(usize, usize) -> (T, T)) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = T::of(len as f64);
    let mut out = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(x.len() / len.max(1));
    for (gi, ((src, o), xh)) in x.chunks(len).zip(out.chunks_mut(len)).zip(xhat.chunks_mut(len)).enumerate() {
        let mean = src.iter().fold(T::zero(), |a, &v| a + v) / n;
        let var = src.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        let istd = T::one() / (var + eps).sqrt();
        inv_std.push(istd);
        for (j, ((&v, o), xh)) in src.iter().zip(o.iter_mut()).zip(xh.iter_mut()).enumerate() {
            *xh = (v - mean) * istd;
            let (gamma, beta) = affine(gi, j);
            *o = *xh * gamma + beta;
        }
    }
    (out, xhat, inv_std)
}

/// Input gradient of a standardization given `dxhat`.
fn normalize_backward<'a, T: Real>(dxhat: &'a [T], xhat: &'a [T], inv_std: T) -> impl Iterator<Item = T> + 'a {
    let n = T::of(dxhat.len() as f64);
    let m1 = dxhat.iter().fold(T::zero(), |a, &v| a + v) / n;
    let m2 = dxhat.iter().zip(xhat).fold(T::zero(), |a, (&d, &x)| a + d * x) / n;
    dxhat.iter().zip(xhat).map(move |(&d, &x)| inv_std * (d - m1 - x * m2))
}

impl<T: Real> Tensor<T> {
    /// Per-row standardization of `[n, c]` followed by `gamma * . + beta`.
    pub fn layer_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 2 {
            return shape_err("layer_norm", s, gamma.shape());
        }
        let c = s[1];
        if gamma.shape() != [c] || beta.shape() != [c] {
            return shape_err("layer_norm(affine)", s, gamma.shape());
        }
        if eps <= 0.0 {
            return config_err("layer_norm", "eps must be positive");
        }
        let (gd, bd) = (gamma.data_arc(), beta.data_arc());
        let (out, xhat, inv_std) = normalize(self.data(), c, T::of(eps), |_, j| (gd[j], bd[j]));
        Ok(Tensor::from_op(
            "layer_norm",
            s.to_vec(),
            Arc::new(out),
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |g, need| {
                let gx = need[0].then(|| {
                    let mut gx = Vec::with_capacity(g.len());
                    let mut dxhat = vec![T::zero(); c];
                    for ((gr, xr), &istd) in g.chunks(c).zip(xhat.chunks(c)).zip(&inv_std) {
                        for ((d, &g), &gm) in dxhat.iter_mut().zip(gr).zip(gd.iter()) {
                            *d = g * gm;
                        }
                        gx.extend(normalize_backward(&dxhat, xr, istd));
                    }
                    gx
                });
                let ggamma = need[1].then(|| {
                    let mut acc = vec![T::zero(); c];
                    for (gr, xr) in g.chunks(c).zip(xhat.chunks(c)) {
                        for ((a, &g), &x) in acc.iter_mut().zip(gr).zip(xr) {
                            *a = *a + g * x;
                        }
                    }
                    acc
                });
                let gbeta = need[2].then(|| {
                    let mut acc = vec![T::zero(); c];
                    for gr in g.chunks(c) {
                        acc.iter_mut().zip(gr).for_each(|(a, &g)| *a = *a + g);
                    }
                    acc
                });
                vec![gx, ggamma, gbeta]
            },
        ))
    }

    /// Per-channel spatial standardization of `[c, h, w]` followed by a
    /// per-channel affine map.
    pub fn instance_norm(&self, gamma: &Tensor<T>, beta: &Tensor<T>, eps: f64) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() != 3 {
            return shape_err("instance_norm", s, gamma.shape());
        }
        let (c, hw) = (s[0], s[1] * s[2]);
        if gamma.shape() != [c] || beta.shape() != [c] {
            return shape_err("instance_norm(affine)", s, gamma.shape());
        }
        if eps <= 0.0 {
            return config_err("instance_norm", "eps must be positive");
        }
        let (gd, bd) = (gamma.data_arc(), beta.data_arc());
        let (out, xhat, inv_std) = normalize(self.data(), hw, T::of(eps), |ch, _| (gd[ch], bd[ch]));
        Ok(Tensor::from_op(
            "instance_norm",
            s.to_vec(),
            Arc::new(out),
            vec![self.clone(), gamma.clone(), beta.clone()],
            move |g, need| {
                let gx = need[0].then(|| {
                    let mut gx = Vec::with_capacity(g.len());
                    for (ch, ((gr, xr), &istd)) in g.chunks(hw).zip(xhat.chunks(hw)).zip(&inv_std).enumerate() {
                        let dxhat: Vec<T> = gr.iter().map(|&v| v * gd[ch]).collect();
                        gx.extend(normalize_backward(&dxhat, xr, istd));
                    }
                    gx
                });
                let ggamma = need[1].then(|| {
                    g.chunks(hw)
                        .zip(xhat.chunks(hw))
                        .map(|(gr, xr)| gr.iter().zip(xr).fold(T::zero(), |a, (&g, &x)| a + g * x))
                        .collect()
                });
                let gbeta = need[2].then(|| g.chunks(hw).map(|gr| gr.iter().fold(T::zero(), |a, &v| a + v)).collect());
                vec![gx, ggamma, gbeta]
            },
        ))
    }
}
