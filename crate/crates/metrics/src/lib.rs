//! Image quality metrics on magnitude images.

use sdl_mri::ComplexImage;
use sdl_tensor::Real;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("image {h}x{w} is smaller than the {win}x{win} window")]
    TooSmall { h: usize, w: usize, win: usize },
    #[error("invalid magnitude image: {0}")]
    Invalid(String),
    #[error("reference has zero dynamic range")]
    ZeroRange,
}

pub type Result<T> = std::result::Result<T, MetricError>;

/// SSIM window side.
pub const WIN: usize = 7;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;

/// Nonnegative finite `[H, W]` image, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnitudeImage {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl MagnitudeImage {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != h * w {
            return Err(MetricError::Invalid(format!("{} values for {h}x{w}", data.len())));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(MetricError::Invalid(format!("value {v} is negative or non-finite")));
        }
        Ok(Self { h, w, data })
    }

    /// `|x|` pixel by pixel.
    pub fn from_complex<T: Real>(x: &ComplexImage<T>) -> Result<Self> {
        Self::new(x.h(), x.w(), sdl_mri::magnitude_image(x))
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }
}

fn same_shape(a: &MagnitudeImage, b: &MagnitudeImage) -> Result<()> {
    if (a.h, a.w) != (b.h, b.w) {
        return Err(MetricError::Shape((a.h, a.w), (b.h, b.w)));
    }
    Ok(())
}

pub fn mse(a: &MagnitudeImage, b: &MagnitudeImage) -> Result<f64> {
    same_shape(a, b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64)
}

/// `10 log10(max(ref)^2 / MSE)` in dB; `f64::INFINITY` when the images are equal.
pub fn psnr(reference: &MagnitudeImage, test: &MagnitudeImage) -> Result<f64> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    let peak = reference.max();
    Ok(10.0 * (peak * peak / e).log10())
}

/// Mean SSIM over every fully contained 7x7 window, data range `max(ref)`.
pub fn ssim(reference: &MagnitudeImage, test: &MagnitudeImage) -> Result<f64> {
    ssim_with_range(reference, test, reference.max())
}

/// Mean SSIM with an explicit data range, using unbiased window statistics.
pub fn ssim_with_range(a: &MagnitudeImage, b: &MagnitudeImage, range: f64) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w) = (a.h, a.w);
    if h < WIN || w < WIN {
        return Err(MetricError::TooSmall { h, w, win: WIN });
    }
    if range.is_nan() || range <= 0.0 {
        return Err(MetricError::ZeroRange);
    }
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);
    let np = (WIN * WIN) as f64;
    let cov_norm = np / (np - 1.0);
    let (x, y) = (&a.data, &b.data);
    let mut total = 0.0;
    for r in 0..=h - WIN {
        for c in 0..=w - WIN {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in r..r + WIN {
                for j in c..c + WIN {
                    let (p, q) = (x[i * w + j], y[i * w + j]);
                    sx += p;
                    sy += q;
                    sxx += p * p;
                    syy += q * q;
                    sxy += p * q;
                }
            }
            let (ux, uy) = (sx / np, sy / np);
            let vx = cov_norm * (sxx / np - ux * ux);
            let vy = cov_norm * (syy / np - uy * uy);
            let vxy = cov_norm * (sxy / np - ux * uy);
            let num = (2.0 * ux * uy + c1) * (2.0 * vxy + c2);
            let den = (ux * ux + uy * uy + c1) * (vx + vy + c2);
            total += num / den;
        }
    }
    Ok(total / ((h - WIN + 1) * (w - WIN + 1)) as f64)
}
