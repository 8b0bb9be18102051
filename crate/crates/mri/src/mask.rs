use rand::seq::index::sample;
use rand::Rng;

use crate::error::{config, MriError, Result};
use crate::seed::{derive_seed, rng_for};

/// Cartesian column mask, shared by every row and coil.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    pub cols: Vec<bool>,
    /// Nominal acceleration the mask was drawn for.
    pub accel: u32,
    /// Width of the always-sampled centered block.
    pub acs: usize,
}

/// Disjoint partition of an acquisition mask: `m1` feeds the network,
/// `m2` holds the loss targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMasks {
    pub m1: SamplingMask,
    pub m2: SamplingMask,
}

/// Centered ACS fraction used for each acceleration.
pub fn default_acs_frac(accel: u32) -> f64 {
    if accel == 5 {
        0.10
    } else {
        0.125
    }
}

fn acs_start(w: usize, acs: usize) -> usize {
    w / 2 - acs / 2
}

impl SamplingMask {
    pub fn full(w: usize) -> Self {
        Self {
            cols: vec![true; w],
            accel: 1,
            acs: w,
        }
    }

    pub fn empty(w: usize) -> Self {
        Self {
            cols: vec![false; w],
            accel: 1,
            acs: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn count(&self) -> usize {
        self.cols.iter().filter(|&&c| c).count()
    }

    pub fn achieved_accel(&self) -> f64 {
        self.width() as f64 / self.count().max(1) as f64
    }

    pub fn acs_range(&self) -> std::ops::Range<usize> {
        let start = acs_start(self.width(), self.acs);
        start..start + self.acs
    }

    /// Element mask over a `[nc, 2, h, w]` tensor.
    pub fn expand(&self, nc: usize, h: usize) -> Vec<bool> {
        let plane: Vec<bool> = (0..h).flat_map(|_| self.cols.iter().copied()).collect();
        (0..2 * nc).flat_map(|_| plane.iter().copied()).collect()
    }

    /// 0/1 weights over a `[nc, 2, h, w]` tensor.
    pub fn weights<T: sdl_tensor::Real>(&self, nc: usize, h: usize) -> Vec<T> {
        self.expand(nc, h)
            .into_iter()
            .map(|b| if b { T::one() } else { T::zero() })
            .collect()
    }
}

/// Draws a column mask: a centered block of `ceil(acs_frac * w)` columns plus
/// uniformly chosen columns, `round(w / accel)` in total.
pub fn make_mask(w: usize, accel: u32, acs_frac: f64, seed: u64) -> Result<SamplingMask> {
    if w == 0 {
        return config("mask width must be positive");
    }
    if accel == 0 {
        return config("acceleration must be at least 1");
    }
    if accel == 1 {
        return Ok(SamplingMask::full(w));
    }
    if !(acs_frac > 0.0 && acs_frac < 1.0) {
        return config(format!("acs fraction {acs_frac} must lie in (0, 1)"));
    }
    if acs_frac * (w as f64) < 2.0 {
        return config(format!("acs fraction {acs_frac} gives fewer than 2 center columns at width {w}"));
    }
    let acs = (acs_frac * w as f64).ceil() as usize;
    let total = (w as f64 / accel as f64).round() as usize;
    if total < acs {
        return config(format!(
            "acceleration {accel} at width {w} allows {total} columns, fewer than the {acs} ACS columns"
        ));
    }
    let mut cols = vec![false; w];
    let start = acs_start(w, acs);
    cols[start..start + acs].iter_mut().for_each(|c| *c = true);
    let outer: Vec<usize> = (0..w).filter(|&c| !cols[c]).collect();
    let mut rng = rng_for(seed, &[crate::seed::TAG_MASK, w as u64, accel as u64]);
    for i in sample(&mut rng, outer.len(), total - acs) {
        cols[outer[i]] = true;
    }
    Ok(SamplingMask { cols, accel, acs })
}

/// Splits `m` into disjoint `(m1, m2)`: ACS columns go to `m1`, every other
/// sampled column goes to `m1` with probability `rho`.
pub fn split_mask(m: &SamplingMask, rho: f64, seed: u64) -> Result<SplitMasks> {
    if !(rho > 0.0 && rho < 1.0) {
        return config(format!("split ratio {rho} must lie in (0, 1)"));
    }
    let acs = m.acs_range();
    let mut rng = rng_for(seed, &[crate::seed::TAG_SPLIT]);
    let mut m1 = vec![false; m.width()];
    let mut m2 = vec![false; m.width()];
    for (c, &sampled) in m.cols.iter().enumerate() {
        if !sampled {
            continue;
        }
        if acs.contains(&c) || rng.gen_bool(rho) {
            m1[c] = true;
        } else {
            m2[c] = true;
        }
    }
    if !m2.iter().any(|&b| b) {
        return Err(MriError::EmptySplit { seed });
    }
    Ok(SplitMasks {
        m1: SamplingMask {
            cols: m1,
            accel: m.accel,
            acs: m.acs,
        },
        m2: SamplingMask {
            cols: m2,
            accel: m.accel,
            acs: 0,
        },
    })
}

/// [`split_mask`] with up to 64 derived reseeds on an empty `m2`.
pub fn split_mask_retry(m: &SamplingMask, rho: f64, seed: u64) -> Result<SplitMasks> {
    let mut last = None;
    for attempt in 0..64u64 {
        let s = if attempt == 0 { seed } else { derive_seed(seed, &[attempt]) };
        match split_mask(m, rho, s) {
            Err(e @ MriError::EmptySplit { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.unwrap())
}
