use sdl_tensor::ops::magnitude;
use sdl_tensor::{Real, Tensor};

use crate::error::{config, MriError, Result};

fn check_rank(t: &Tensor<impl Real>, what: &str, coil_dim: bool) -> Result<()> {
    let s = t.shape();
    let ok = if coil_dim {
        s.len() == 4 && s[0] >= 1 && s[1] == 2
    } else {
        s.len() == 3 && s[0] == 2
    };
    if !ok {
        let want = if coil_dim { "[nc, 2, h, w]" } else { "[2, h, w]" };
        return config(format!("{what} must have shape {want}, got {s:?}"));
    }
    Ok(())
}

/// Complex image `[2, H, W]` (real plane, imaginary plane).
#[derive(Clone, Debug)]
pub struct ComplexImage<T: Real = f64>(Tensor<T>);

impl<T: Real> ComplexImage<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        check_rank(&t, "complex image", false)?;
        Ok(Self(t))
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self(Tensor::zeros(&[2, h, w]))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }

    pub fn h(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn w(&self) -> usize {
        self.0.shape()[2]
    }

    /// Pixel magnitudes, row-major `[H * W]`.
    pub fn magnitude(&self) -> Vec<T> {
        magnitude(self.0.data(), self.h() * self.w())
    }

    pub fn cast<U: Real>(&self) -> ComplexImage<U> {
        ComplexImage(self.0.cast())
    }
}

/// Per-coil k-space `[Nc, 2, H, W]`.
#[derive(Clone, Debug)]
pub struct KSpace<T: Real = f64>(Tensor<T>);

impl<T: Real> KSpace<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        check_rank(&t, "k-space", true)?;
        Ok(Self(t))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.0
    }

    pub fn n_coils(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn h(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn w(&self) -> usize {
        self.0.shape()[3]
    }

    pub fn cast<U: Real>(&self) -> KSpace<U> {
        KSpace(self.0.cast())
    }
}

/// Complex coil sensitivity maps `[Nc, 2, H, W]`.
///
/// Synthetic maps satisfy `sum_i |S_i|^2 = 1` at every pixel; ingested maps
/// are taken as given and can be checked with [`Self::normalization_error`].
#[derive(Clone, Debug)]
pub struct CoilSensitivities<T: Real = f64>(Tensor<T>);

impl<T: Real> CoilSensitivities<T> {
    pub fn new(t: Tensor<T>) -> Result<Self> {
        check_rank(&t, "sensitivity maps", true)?;
        if !t.all_finite() {
            return config("sensitivity maps contain non-finite values");
        }
        Ok(Self(t))
    }

    /// Rescales arbitrary maps so that `sum_i |S_i|^2 = 1` per pixel.
    pub fn normalized(t: Tensor<T>) -> Result<Self> {
        check_rank(&t, "sensitivity maps", true)?;
        let s = t.shape();
        let hw = s[2] * s[3];
        let d = t.to_f64_vec();
        let mut energy = vec![0.0f64; hw];
        for coil in d.chunks(2 * hw) {
            for p in 0..hw {
                energy[p] += coil[p] * coil[p] + coil[hw + p] * coil[hw + p];
            }
        }
        if let Some(p) = energy.iter().position(|&e| e.is_nan() || e <= 0.0) {
            return Err(MriError::Config(format!("sensitivity maps vanish at pixel {p}")));
        }
        let out: Vec<f64> = d.iter().enumerate().map(|(i, &v)| v / energy[i % hw].sqrt()).collect();
        Self::new(Tensor::from_f64(s, &out)?)
    }

    /// Largest deviation of `sum_i |S_i|^2` from one over all pixels.
    pub fn normalization_error(&self) -> f64 {
        let hw = self.h() * self.w();
        let d = self.0.to_f64_vec();
        let mut energy = vec![0.0f64; hw];
        for coil in d.chunks(2 * hw) {
            for p in 0..hw {
                energy[p] += coil[p] * coil[p] + coil[hw + p] * coil[hw + p];
            }
        }
        energy.iter().fold(0.0, |m, e| m.max((e - 1.0).abs()))
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn n_coils(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn h(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn w(&self) -> usize {
        self.0.shape()[3]
    }

    pub fn cast<U: Real>(&self) -> CoilSensitivities<U> {
        CoilSensitivities(self.0.cast())
    }
}

/// Magnitude of a complex image as `f64`, row-major.
pub fn magnitude_image<T: Real>(x: &ComplexImage<T>) -> Vec<f64> {
    x.magnitude().iter().map(|v| v.as_f64()).collect()
}
