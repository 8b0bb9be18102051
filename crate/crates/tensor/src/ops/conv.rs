//! Zero-padded 2-D cross-correlation with groups.
//!
//! Dense groups go through im2col + gemm. The depth-wise case
//! (`groups == c_in == c_out`) uses direct loops.

use std::sync::Arc;

use crate::error::{config_err, shape_err, Result};
use crate::ops::linalg::gemm;
use crate::par;
use crate::real::Real;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug)]
struct Geom {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    pad: usize,
    groups: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn cin_g(&self) -> usize {
        self.c_in / self.groups
    }
    fn cout_g(&self) -> usize {
        self.c_out / self.groups
    }
    fn kdim(&self) -> usize {
        self.cin_g() * self.kh * self.kw
    }
    fn depthwise(&self) -> bool {
        self.groups == self.c_in && self.c_in == self.c_out
    }
}

/// Unfolds one group of one image into `[cin_g * kh * kw, ho * wo]`.
fn im2col<T: Real>(x: &[T], g: &Geom, cols: &mut [T]) {
    let plane = g.ho * g.wo;
    let p = g.pad as isize;
    for c in 0..g.cin_g() {
        let src = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oi in 0..g.ho {
                    let ii = oi as isize + ki as isize - p;
                    let drow = &mut dst[oi * g.wo..(oi + 1) * g.wo];
                    if ii < 0 || ii >= g.h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let srow = &src[ii as usize * g.w..(ii as usize + 1) * g.w];
                    for (oj, d) in drow.iter_mut().enumerate() {
                        let jj = oj as isize + kj as isize - p;
                        *d = if jj < 0 || jj >= g.w as isize {
                            T::zero()
                        } else {
                            srow[jj as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`], accumulating into `dx`.
fn col2im<T: Real>(cols: &[T], g: &Geom, dx: &mut [T]) {
    let plane = g.ho * g.wo;
    let p = g.pad as isize;
    for c in 0..g.cin_g() {
        let dst = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * plane..(row + 1) * plane];
                for oi in 0..g.ho {
                    let ii = oi as isize + ki as isize - p;
                    if ii < 0 || ii >= g.h as isize {
                        continue;
                    }
                    let drow = &mut dst[ii as usize * g.w..(ii as usize + 1) * g.w];
                    for oj in 0..g.wo {
                        let jj = oj as isize + kj as isize - p;
                        if jj >= 0 && jj < g.w as isize {
                            drow[jj as usize] = drow[jj as usize] + src[oi * g.wo + oj];
                        }
                    }
                }
            }
        }
    }
}

// Valid output range along one axis for kernel tap `k`: output index `o`
// reads input `o + k - pad`.
fn tap_range(k: usize, pad: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (n_in + pad).saturating_sub(k).min(n_out);
    (lo, hi.max(lo))
}

fn dw_forward_plane<T: Real>(x: &[T], k: &[T], bias: T, g: &Geom, out: &mut [T]) {
    out.fill(bias);
    for ki in 0..g.kh {
        let (r0, r1) = tap_range(ki, g.pad, g.h, g.ho);
        for kj in 0..g.kw {
            let wv = k[ki * g.kw + kj];
            let (c0, c1) = tap_range(kj, g.pad, g.w, g.wo);
            for oi in r0..r1 {
                let ii = oi + ki - g.pad;
                let src = &x[ii * g.w + c0 + kj - g.pad..ii * g.w + c1 + kj - g.pad];
                let dst = &mut out[oi * g.wo + c0..oi * g.wo + c1];
                dst.iter_mut().zip(src).for_each(|(o, &v)| *o = *o + wv * v);
            }
        }
    }
}

impl<T: Real> Tensor<T> {
    /// Convolves `[c_in, h, w]` or `[b, c_in, h, w]` with kernels
    /// `[c_out, c_in / groups, kh, kw]` and bias `[c_out]`, zero padding
    /// `pad` on every side, stride 1.
    pub fn conv2d(&self, kernel: &Tensor<T>, bias: &Tensor<T>, pad: usize, groups: usize) -> Result<Tensor<T>> {
        let xs = self.shape();
        let (batch, c_in, h, w) = match *xs {
            [c, h, w] => (1, c, h, w),
            [b, c, h, w] => (b, c, h, w),
            _ => return shape_err("conv2d", xs, kernel.shape()),
        };
        let ks = kernel.shape();
        if ks.len() != 4 {
            return shape_err("conv2d", xs, ks);
        }
        let (c_out, kh, kw) = (ks[0], ks[2], ks[3]);
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return config_err("conv2d", format!("groups={groups} must divide c_in={c_in} and c_out={c_out}"));
        }
        if ks[1] != c_in / groups {
            return shape_err("conv2d", xs, ks);
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return config_err("conv2d", format!("kernel {kh}x{kw} must be odd"));
        }
        if bias.shape() != [c_out] {
            return shape_err("conv2d(bias)", ks, bias.shape());
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return config_err("conv2d", "kernel larger than padded input");
        }
        let g = Geom {
            batch,
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            pad,
            groups,
            ho: h + 2 * pad + 1 - kh,
            wo: w + 2 * pad + 1 - kw,
        };
        let out_shape = if xs.len() == 3 {
            vec![c_out, g.ho, g.wo]
        } else {
            vec![batch, c_out, g.ho, g.wo]
        };
        let out = if g.depthwise() {
            dw_forward(self.data(), kernel.data(), bias.data(), &g)
        } else {
            dense_forward(self.data(), kernel.data(), bias.data(), &g)
        };
        let (xd, kd) = (self.data_arc(), kernel.data_arc());
        Ok(Tensor::from_op(
            "conv2d",
            out_shape,
            Arc::new(out),
            vec![self.clone(), kernel.clone(), bias.clone()],
            move |gout, need| {
                let (gx, gk) = if g.depthwise() {
                    dw_backward(&xd, &kd, gout, &g, need[0], need[1])
                } else {
                    dense_backward(&xd, &kd, gout, &g, need[0], need[1])
                };
                let gb = need[2].then(|| {
                    let plane = g.ho * g.wo;
                    let mut gb = vec![T::zero(); g.c_out];
                    for b in 0..g.batch {
                        for (c, acc) in gb.iter_mut().enumerate() {
                            let s = &gout[(b * g.c_out + c) * plane..(b * g.c_out + c + 1) * plane];
                            *acc = s.iter().fold(*acc, |a, &v| a + v);
                        }
                    }
                    gb
                });
                vec![gx, gk, gb]
            },
        ))
    }
}

fn dense_forward<T: Real>(x: &[T], k: &[T], bias: &[T], g: &Geom) -> Vec<T> {
    let plane = g.ho * g.wo;
    let (cin_g, cout_g, kdim) = (g.cin_g(), g.cout_g(), g.kdim());
    let mut out = vec![T::zero(); g.batch * g.c_out * plane];
    // one chunk per (image, group)
    par::for_each_chunk(&mut out, cout_g * plane, |i, dst| {
        let (b, grp) = (i / g.groups, i % g.groups);
        let xin = &x[(b * g.c_in + grp * cin_g) * g.h * g.w..];
        let mut cols = vec![T::zero(); kdim * plane];
        im2col(xin, g, &mut cols);
        for (co, row) in dst.chunks_mut(plane).enumerate() {
            row.fill(bias[grp * cout_g + co]);
        }
        gemm(cout_g, kdim, plane, &k[grp * cout_g * kdim..], false, &cols, false, dst, true);
    });
    out
}

fn dense_backward<T: Real>(x: &[T], k: &[T], gout: &[T], g: &Geom, need_x: bool, need_k: bool) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let plane = g.ho * g.wo;
    let (cin_g, cout_g, kdim) = (g.cin_g(), g.cout_g(), g.kdim());
    let gx = need_x.then(|| {
        let mut gx = vec![T::zero(); g.batch * g.c_in * g.h * g.w];
        par::for_each_chunk(&mut gx, cin_g * g.h * g.w, |i, dst| {
            let (b, grp) = (i / g.groups, i % g.groups);
            let go = &gout[(b * g.c_out + grp * cout_g) * plane..];
            let mut cols = vec![T::zero(); kdim * plane];
            gemm(kdim, cout_g, plane, &k[grp * cout_g * kdim..], true, go, false, &mut cols, false);
            col2im(&cols, g, dst);
        });
        gx
    });
    let gk = need_k.then(|| {
        let mut gk = vec![T::zero(); g.c_out * kdim];
        par::for_each_chunk(&mut gk, cout_g * kdim, |grp, dst| {
            let mut cols = vec![T::zero(); kdim * plane];
            for b in 0..g.batch {
                let xin = &x[(b * g.c_in + grp * cin_g) * g.h * g.w..];
                im2col(xin, g, &mut cols);
                let go = &gout[(b * g.c_out + grp * cout_g) * plane..];
                gemm(cout_g, plane, kdim, go, false, &cols, true, dst, true);
            }
        });
        gk
    });
    (gx, gk)
}

fn dw_forward<T: Real>(x: &[T], k: &[T], bias: &[T], g: &Geom) -> Vec<T> {
    let plane = g.ho * g.wo;
    let kk = g.kh * g.kw;
    let mut out = vec![T::zero(); g.batch * g.c_out * plane];
    par::for_each_chunk(&mut out, plane, |i, dst| {
        let c = i % g.c_in;
        dw_forward_plane(&x[i * g.h * g.w..(i + 1) * g.h * g.w], &k[c * kk..(c + 1) * kk], bias[c], g, dst);
    });
    out
}

fn dw_backward<T: Real>(x: &[T], k: &[T], gout: &[T], g: &Geom, need_x: bool, need_k: bool) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let plane = g.ho * g.wo;
    let hw = g.h * g.w;
    let kk = g.kh * g.kw;
    let gx = need_x.then(|| {
        let mut gx = vec![T::zero(); g.batch * g.c_in * hw];
        par::for_each_chunk(&mut gx, hw, |i, dst| {
            let c = i % g.c_in;
            let go = &gout[i * plane..(i + 1) * plane];
            for ki in 0..g.kh {
                let (r0, r1) = tap_range(ki, g.pad, g.h, g.ho);
                for kj in 0..g.kw {
                    let wv = k[c * kk + ki * g.kw + kj];
                    let (c0, c1) = tap_range(kj, g.pad, g.w, g.wo);
                    for oi in r0..r1 {
                        let ii = oi + ki - g.pad;
                        let d = &mut dst[ii * g.w + c0 + kj - g.pad..ii * g.w + c1 + kj - g.pad];
                        let s = &go[oi * g.wo + c0..oi * g.wo + c1];
                        d.iter_mut().zip(s).for_each(|(o, &v)| *o = *o + wv * v);
                    }
                }
            }
        });
        gx
    });
    let gk = need_k.then(|| {
        let mut gk = vec![T::zero(); g.c_out * kk];
        par::for_each_chunk(&mut gk, kk, |c, dst| {
            for b in 0..g.batch {
                let i = b * g.c_in + c;
                let xin = &x[i * hw..(i + 1) * hw];
                let go = &gout[i * plane..(i + 1) * plane];
                for ki in 0..g.kh {
                    let (r0, r1) = tap_range(ki, g.pad, g.h, g.ho);
                    for kj in 0..g.kw {
                        let (c0, c1) = tap_range(kj, g.pad, g.w, g.wo);
                        let mut acc = T::zero();
                        for oi in r0..r1 {
                            let ii = oi + ki - g.pad;
                            let s = &xin[ii * g.w + c0 + kj - g.pad..ii * g.w + c1 + kj - g.pad];
                            let o = &go[oi * g.wo + c0..oi * g.wo + c1];
                            acc = s.iter().zip(o).fold(acc, |a, (&x, &g)| a + x * g);
                        }
                        dst[ki * g.kw + kj] = dst[ki * g.kw + kj] + acc;
                    }
                }
            }
        });
        gk
    });
    (gx, gk)
}
