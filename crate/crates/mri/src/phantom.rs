//! Synthetic slices: piecewise-constant ellipse/rectangle phantoms with a
//! smooth phase, and Gaussian-profile coil maps.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sdl_tensor::Tensor;

use crate::error::{config, Result};
use crate::seed::{rng_for, TAG_COILS, TAG_PHANTOM};
use crate::types::{CoilSensitivities, ComplexImage};

/// Normalized coordinates in [-1, 1) with the origin at the array center.
fn grid(h: usize, w: usize) -> impl Iterator<Item = (f64, f64)> {
    let (hc, wc) = ((h / 2) as f64, (w / 2) as f64);
    (0..h).flat_map(move |r| (0..w).map(move |c| ((c as f64 - wc) / wc.max(1.0), (r as f64 - hc) / hc.max(1.0))))
}

enum Shape {
    Ellipse { cx: f64, cy: f64, a: f64, b: f64, rot: f64 },
    Rect { cx: f64, cy: f64, a: f64, b: f64, rot: f64 },
}

impl Shape {
    fn contains(&self, u: f64, v: f64) -> bool {
        let (cx, cy, a, b, rot, ellipse) = match *self {
            Shape::Ellipse { cx, cy, a, b, rot } => (cx, cy, a, b, rot, true),
            Shape::Rect { cx, cy, a, b, rot } => (cx, cy, a, b, rot, false),
        };
        let (s, c) = rot.sin_cos();
        let (du, dv) = (u - cx, v - cy);
        let (x, y) = ((du * c + dv * s) / a, (-du * s + dv * c) / b);
        if ellipse {
            x * x + y * y <= 1.0
        } else {
            x.abs() <= 1.0 && y.abs() <= 1.0
        }
    }
}

fn smooth_phase(rng: &mut ChaCha8Rng, scale: f64) -> [f64; 4] {
    [
        rng.gen_range(-PI..PI),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
        rng.gen_range(-scale..scale),
    ]
}

fn eval_phase(p: &[f64; 4], u: f64, v: f64) -> f64 {
    p[0] + p[1] * u + p[2] * v + p[3] * u * v
}

/// Random phantom with peak magnitude 1.
pub fn make_phantom(h: usize, w: usize, seed: u64) -> Result<ComplexImage<f64>> {
    if h < 2 || w < 2 {
        return config(format!("phantom size {h}x{w} is too small"));
    }
    let mut rng = rng_for(seed, &[TAG_PHANTOM]);
    let body = Shape::Ellipse {
        cx: rng.gen_range(-0.05..0.05),
        cy: rng.gen_range(-0.05..0.05),
        a: rng.gen_range(0.65..0.85),
        b: rng.gen_range(0.7..0.9),
        rot: rng.gen_range(-0.3..0.3),
    };
    let mut parts = vec![(body, rng.gen_range(0.5..0.8))];
    for _ in 0..rng.gen_range(3..7) {
        let e = Shape::Ellipse {
            cx: rng.gen_range(-0.45..0.45),
            cy: rng.gen_range(-0.45..0.45),
            a: rng.gen_range(0.06..0.3),
            b: rng.gen_range(0.06..0.3),
            rot: rng.gen_range(0.0..PI),
        };
        let sign = if rng.gen_bool(0.6) { 1.0 } else { -1.0 };
        parts.push((e, sign * rng.gen_range(0.1..0.4)));
    }
    for _ in 0..rng.gen_range(1..3) {
        let r = Shape::Rect {
            cx: rng.gen_range(-0.4..0.4),
            cy: rng.gen_range(-0.4..0.4),
            a: rng.gen_range(0.04..0.18),
            b: rng.gen_range(0.04..0.18),
            rot: rng.gen_range(0.0..PI),
        };
        parts.push((r, rng.gen_range(0.15..0.35)));
    }
    let phase = smooth_phase(&mut rng, 0.6);

    let mag: Vec<f64> = grid(h, w)
        .map(|(u, v)| parts.iter().filter(|(s, _)| s.contains(u, v)).map(|(_, i)| i).sum::<f64>().max(0.0))
        .collect();
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return config("phantom has no support at this size");
    }
    let hw = h * w;
    let mut data = vec![0.0; 2 * hw];
    for (p, (u, v)) in grid(h, w).enumerate() {
        let (s, c) = eval_phase(&phase, u, v).sin_cos();
        let m = mag[p] / peak;
        data[p] = m * c;
        data[hw + p] = m * s;
    }
    ComplexImage::new(Tensor::from_vec(&[2, h, w], data)?)
}

/// Gaussian coil profiles centered around the field of view, pixel-wise
/// normalized so that `sum_i |S_i|^2 = 1`.
pub fn make_coils(n_c: usize, h: usize, w: usize, seed: u64) -> Result<CoilSensitivities<f64>> {
    if n_c < 1 {
        return config("at least one coil is required");
    }
    let mut rng = rng_for(seed, &[TAG_COILS]);
    let offset = rng.gen_range(0.0..2.0 * PI);
    let hw = h * w;
    let mut data = vec![0.0; n_c * 2 * hw];
    for (i, coil) in data.chunks_mut(2 * hw).enumerate() {
        let theta = offset + 2.0 * PI * i as f64 / n_c as f64 + rng.gen_range(-0.2..0.2);
        let radius = rng.gen_range(1.0..1.3);
        let (cx, cy) = (radius * theta.cos(), radius * theta.sin());
        let sigma = rng.gen_range(0.7..1.1);
        let phase = smooth_phase(&mut rng, 0.8);
        for (p, (u, v)) in grid(h, w).enumerate() {
            let d2 = (u - cx).powi(2) + (v - cy).powi(2);
            let m = (-d2 / (2.0 * sigma * sigma)).exp();
            let (s, c) = eval_phase(&phase, u, v).sin_cos();
            coil[p] = m * c;
            coil[hw + p] = m * s;
        }
    }
    CoilSensitivities::normalized(Tensor::from_vec(&[n_c, 2, h, w], data)?)
}
