//! Complex arithmetic on planar `[..., 2, h, w]` tensors.

use std::sync::Arc;

use crate::error::{shape_err, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// `(ar + i ai) * (br + i bi)`, or `conj(a) * b` when `conj_a` is set.
#[inline]
pub fn cmul<T: Real>(ar: T, ai: T, br: T, bi: T, conj_a: bool) -> (T, T) {
    let ai = if conj_a { -ai } else { ai };
    (ar * br - ai * bi, ar * bi + ai * br)
}

/// Pixel magnitudes of every complex plane in `data` (`[..., 2, h, w]`).
pub fn magnitude<T: Real>(data: &[T], hw: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len() / 2);
    for pair in data.chunks(2 * hw) {
        let (re, im) = pair.split_at(hw);
        out.extend(re.iter().zip(im).map(|(&r, &i)| r.hypot(i)));
    }
    out
}

fn planes<T: Real>(weights: &[T], src: &[T], dst: &mut [T], hw: usize, conj_w: bool, accumulate: bool) {
    let (wr, wi) = weights.split_at(hw);
    let (sr, si) = src.split_at(hw);
    let (dr, di) = dst.split_at_mut(hw);
    for p in 0..hw {
        let (r, i) = cmul(wr[p], wi[p], sr[p], si[p], conj_w);
        if accumulate {
            dr[p] = dr[p] + r;
            di[p] = di[p] + i;
        } else {
            dr[p] = r;
            di[p] = i;
        }
    }
}

fn check_coils<T: Real>(op: &'static str, maps: &Tensor<T>) -> Result<(usize, usize)> {
    let s = maps.shape();
    if s.len() != 4 || s[1] != 2 {
        return shape_err(op, s, &[0, 2, 0, 0]);
    }
    Ok((s[0], s[2] * s[3]))
}

impl<T: Real> Tensor<T> {
    /// Elementwise complex product of two same-shape planar tensors.
    pub fn cmul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        self.same_shape(other, "cmul")?;
        let s = self.shape();
        if s.len() < 3 || s[s.len() - 3] != 2 {
            return shape_err("cmul", s, &[2, 0, 0]);
        }
        let hw = s[s.len() - 2] * s[s.len() - 1];
        let mut out = vec![T::zero(); self.numel()];
        for ((a, b), o) in self
            .data()
            .chunks(2 * hw)
            .zip(other.data().chunks(2 * hw))
            .zip(out.chunks_mut(2 * hw))
        {
            planes(a, b, o, hw, false, false);
        }
        let (ad, bd) = (self.data_arc(), other.data_arc());
        Ok(Tensor::from_op(
            "cmul",
            s.to_vec(),
            Arc::new(out),
            vec![self.clone(), other.clone()],
            move |g, need| {
                let grad_by = |w: &[T]| {
                    let mut gx = vec![T::zero(); g.len()];
                    for ((w, g), o) in w.chunks(2 * hw).zip(g.chunks(2 * hw)).zip(gx.chunks_mut(2 * hw)) {
                        planes(w, g, o, hw, true, false);
                    }
                    gx
                };
                vec![need[0].then(|| grad_by(&bd)), need[1].then(|| grad_by(&ad))]
            },
        ))
    }

    /// Complex conjugate.
    pub fn conj(&self) -> Result<Tensor<T>> {
        let s = self.shape();
        if s.len() < 3 || s[s.len() - 3] != 2 {
            return shape_err("conj", s, &[2, 0, 0]);
        }
        let hw = s[s.len() - 2] * s[s.len() - 1];
        let flip: Vec<T> = (0..self.numel())
            .map(|i| if (i / hw) % 2 == 1 { -T::one() } else { T::one() })
            .collect();
        self.mul_const(&flip)
    }

    /// Per-coil weighting `[2, h, w] -> [nc, 2, h, w]`, `out_i = maps_i * x`.
    /// The maps are treated as constants.
    pub fn coil_expand(&self, maps: &Tensor<T>) -> Result<Tensor<T>> {
        let (nc, hw) = check_coils("coil_expand", maps)?;
        if self.shape() != [2, maps.shape()[2], maps.shape()[3]] {
            return shape_err("coil_expand", self.shape(), maps.shape());
        }
        let md = maps.data_arc();
        let mut out = vec![T::zero(); nc * 2 * hw];
        for (m, o) in md.chunks(2 * hw).zip(out.chunks_mut(2 * hw)) {
            planes(m, self.data(), o, hw, false, false);
        }
        Ok(Tensor::from_op(
            "coil_expand",
            maps.shape().to_vec(),
            Arc::new(out),
            vec![self.clone()],
            move |g, _| {
                let mut gx = vec![T::zero(); 2 * hw];
                for (m, g) in md.chunks(2 * hw).zip(g.chunks(2 * hw)) {
                    planes(m, g, &mut gx, hw, true, true);
                }
                vec![Some(gx)]
            },
        ))
    }

    /// Coil combination `[nc, 2, h, w] -> [2, h, w]`,
    /// `out = sum_i conj(maps_i) * y_i`. The maps are treated as constants.
    pub fn coil_reduce(&self, maps: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, hw) = check_coils("coil_reduce", maps)?;
        self.same_shape(maps, "coil_reduce")?;
        let md = maps.data_arc();
        let mut out = vec![T::zero(); 2 * hw];
        for (m, y) in md.chunks(2 * hw).zip(self.data().chunks(2 * hw)) {
            planes(m, y, &mut out, hw, true, true);
        }
        let s = maps.shape();
        Ok(Tensor::from_op(
            "coil_reduce",
            vec![2, s[2], s[3]],
            Arc::new(out),
            vec![self.clone()],
            move |g, _| {
                let mut gy = vec![T::zero(); md.len()];
                for (m, o) in md.chunks(2 * hw).zip(gy.chunks_mut(2 * hw)) {
                    planes(m, g, o, hw, false, false);
                }
                vec![Some(gy)]
            },
        ))
    }
}
