//! Centered, orthonormal 2-D DFT on planar complex tensors.
//!
//! A complex field is stored as `[..., 2, h, w]`: the real plane followed by
//! the imaginary plane. DC sits at `(h/2, w/2)` in both domains and the
//! transform is scaled by `1/sqrt(h*w)`, which makes it unitary: the inverse
//! is also the adjoint, so each direction backpropagates through the other.

use std::sync::Arc;

use rustfft::num_complex::Complex;

use crate::error::{shape_err, Result};
use crate::par;
use crate::real::Real;
use crate::tensor::Tensor;

/// Transforms one complex plane (`re`, `im` of length `h * w`) into `out_re`,
/// `out_im`.
pub fn fft2c_plane<T: Real>(re: &[T], im: &[T], h: usize, w: usize, inverse: bool, out_re: &mut [T], out_im: &mut [T]) {
    let (hh, hw) = (h / 2, w / 2);
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(h * w);
    for i in 0..h {
        let si = (i + hh) % h;
        for j in 0..w {
            let s = si * w + (j + hw) % w;
            buf.push(Complex::new(re[s], im[s]));
        }
    }
    T::fft_plan(w, inverse).process(&mut buf);
    let mut cols: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); h * w];
    for i in 0..h {
        for j in 0..w {
            cols[j * h + i] = buf[i * w + j];
        }
    }
    T::fft_plan(h, inverse).process(&mut cols);
    let scale = T::one() / T::of((h * w) as f64).sqrt();
    for k in 0..h {
        let si = (k + h - hh) % h;
        for l in 0..w {
            let sj = (l + w - hw) % w;
            let v = cols[sj * h + si];
            out_re[k * w + l] = v.re * scale;
            out_im[k * w + l] = v.im * scale;
        }
    }
}

/// Applies the centered transform to every `[2, h, w]` plane pair of `data`.
pub fn fft2c_planes<T: Real>(data: &[T], h: usize, w: usize, inverse: bool) -> Vec<T> {
    let hw = h * w;
    let mut out = vec![T::zero(); data.len()];
    par::for_each_chunk(&mut out, 2 * hw, |b, dst| {
        let src = &data[b * 2 * hw..(b + 1) * 2 * hw];
        let (ore, oim) = dst.split_at_mut(hw);
        fft2c_plane(&src[..hw], &src[hw..], h, w, inverse, ore, oim);
    });
    out
}

fn complex_dims(shape: &[usize]) -> Option<(usize, usize)> {
    let n = shape.len();
    if n < 3 || shape[n - 3] != 2 {
        return None;
    }
    Some((shape[n - 2], shape[n - 1]))
}

impl<T: Real> Tensor<T> {
    fn centered_dft(&self, inverse: bool, op: &'static str) -> Result<Tensor<T>> {
        let Some((h, w)) = complex_dims(self.shape()) else {
            return shape_err(op, self.shape(), &[2, 0, 0]);
        };
        let out = fft2c_planes(self.data(), h, w, inverse);
        Ok(Tensor::from_op(
            op,
            self.shape().to_vec(),
            Arc::new(out),
            vec![self.clone()],
            move |g, _| vec![Some(fft2c_planes(g, h, w, !inverse))],
        ))
    }

    /// Image to k-space on `[..., 2, h, w]`.
    pub fn fft2c(&self) -> Result<Tensor<T>> {
        self.centered_dft(false, "fft2c")
    }

    /// K-space to image on `[..., 2, h, w]`.
    pub fn ifft2c(&self) -> Result<Tensor<T>> {
        self.centered_dft(true, "ifft2c")
    }
}
