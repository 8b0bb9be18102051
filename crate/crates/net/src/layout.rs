use std::sync::Arc;

use sdl_tensor::{Real, Tensor, TensorError};

use crate::error::{NetError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    /// Contiguous `M x M` tiles.
    Dense,
    /// Tokens dilated by `(H/M, W/M)` across the whole image.
    Sparse,
}

/// Maps `(window, slot)` to a flat token position `row * W + col`.
#[derive(Clone, Debug)]
pub struct WindowLayout {
    pub mode: WindowMode,
    pub h: usize,
    pub w: usize,
    pub m: usize,
    index: Arc<Vec<usize>>,
    inverse: Arc<Vec<usize>>,
}

impl WindowLayout {
    pub fn new(mode: WindowMode, h: usize, w: usize, m: usize) -> Result<Self> {
        if m == 0 || !h.is_multiple_of(m) || !w.is_multiple_of(m) {
            return Err(NetError::Tensor(TensorError::Contract(format!(
                "window {m} does not divide {h}x{w}; pad first"
            ))));
        }
        let (gh, gw) = (h / m, w / m);
        let mut index = Vec::with_capacity(h * w);
        for a in 0..gh {
            for b in 0..gw {
                for i in 0..m {
                    for j in 0..m {
                        let (r, c) = match mode {
                            WindowMode::Dense => (a * m + i, b * m + j),
                            WindowMode::Sparse => (a + i * gh, b + j * gw),
                        };
                        index.push(r * w + c);
                    }
                }
            }
        }
        let mut inverse = vec![0; h * w];
        for (k, &p) in index.iter().enumerate() {
            inverse[p] = k;
        }
        Ok(Self {
            mode,
            h,
            w,
            m,
            index: Arc::new(index),
            inverse: Arc::new(inverse),
        })
    }

    pub fn n_windows(&self) -> usize {
        (self.h / self.m) * (self.w / self.m)
    }

    pub fn window_len(&self) -> usize {
        self.m * self.m
    }

    /// `(row, col)` of `slot` in `window`.
    pub fn coord(&self, window: usize, slot: usize) -> (usize, usize) {
        let p = self.index[window * self.window_len() + slot];
        (p / self.w, p % self.w)
    }

    /// `(window, slot)` holding pixel `(row, col)`.
    pub fn locate(&self, row: usize, col: usize) -> (usize, usize) {
        let k = self.inverse[row * self.w + col];
        (k / self.window_len(), k % self.window_len())
    }

    pub fn positions(&self) -> &[usize] {
        &self.index
    }
}

fn check_chw<T: Real>(x: &Tensor<T>, layout: &WindowLayout) -> Result<usize> {
    let s = x.shape();
    if s.len() != 3 || s[1] != layout.h || s[2] != layout.w {
        return Err(NetError::Tensor(TensorError::Shape {
            op: "window_partition",
            lhs: s.to_vec(),
            rhs: vec![layout.h, layout.w],
        }));
    }
    Ok(s[0])
}

/// `[C, H, W] -> [nWin, M*M, C]`.
pub fn window_partition<T: Real>(x: &Tensor<T>, layout: &WindowLayout) -> Result<Tensor<T>> {
    let c = check_chw(x, layout)?;
    let n = layout.h * layout.w;
    let idx: Vec<usize> = layout.index.iter().flat_map(|&p| (0..c).map(move |ch| ch * n + p)).collect();
    Ok(x.gather(Arc::new(idx), &[layout.n_windows(), layout.window_len(), c])?)
}

/// Inverse of [`window_partition`]: `[nWin, M*M, C] -> [C, H, W]`.
pub fn window_merge<T: Real>(xw: &Tensor<T>, layout: &WindowLayout) -> Result<Tensor<T>> {
    let s = xw.shape();
    let n = layout.h * layout.w;
    if xw.ndim() != 3 || s[0] * s[1] != n {
        return Err(NetError::Tensor(TensorError::Shape {
            op: "window_merge",
            lhs: s.to_vec(),
            rhs: vec![layout.n_windows(), layout.window_len()],
        }));
    }
    let c = s[2];
    let mut idx = vec![0; c * n];
    for ch in 0..c {
        for p in 0..n {
            idx[ch * n + p] = layout.inverse[p] * c + ch;
        }
    }
    Ok(xw.gather(Arc::new(idx), &[c, layout.h, layout.w])?)
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let k = i % period;
    if k < n {
        k
    } else {
        period - k
    }
}

/// Reflect-pads `[C, H, W]` at the bottom and right to multiples of `m`.
pub fn reflect_pad<T: Real>(x: &Tensor<T>, m: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    let (hp, wp) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    if (hp, wp) == (h, w) {
        return Ok(x.clone());
    }
    let mut idx = Vec::with_capacity(c * hp * wp);
    for ch in 0..c {
        for r in 0..hp {
            for col in 0..wp {
                idx.push((ch * h + reflect(r, h)) * w + reflect(col, w));
            }
        }
    }
    Ok(x.gather(Arc::new(idx), &[c, hp, wp])?)
}

/// Top-left `[C, h, w]` crop.
pub fn crop<T: Real>(x: &Tensor<T>, h: usize, w: usize) -> Result<Tensor<T>> {
    let s = x.shape();
    let (c, hp, wp) = (s[0], s[1], s[2]);
    if (hp, wp) == (h, w) {
        return Ok(x.clone());
    }
    let idx: Vec<usize> = (0..c)
        .flat_map(|ch| (0..h).flat_map(move |r| (0..w).map(move |col| (ch * hp + r) * wp + col)))
        .collect();
    Ok(x.gather(Arc::new(idx), &[c, h, w])?)
}
