//! SDLK slice files.
//!
//! Little-endian layout: magic `SDLK`, u32 version (1), u32 coils, u32 height,
//! u32 width, k-space as complex64 (re, im interleaved; coil-major, row-major),
//! sensitivity maps in the same layout, a u8 ground-truth flag, then the
//! optional ground-truth image as complex64.

use std::path::Path;

use sdl_tensor::Tensor;

use crate::apply_forward;
use crate::error::{MriError, Result};
use crate::forward::coil_combine;
use crate::mask::SamplingMask;
use crate::phantom::{make_coils, make_phantom};
use crate::seed::derive_seed;
use crate::types::{CoilSensitivities, ComplexImage, KSpace};

pub const MAGIC: &[u8; 4] = b"SDLK";
pub const VERSION: u32 = 1;

/// One fully described slice. Values are held in `f64` but are exactly
/// representable in `f32`, so a load/save cycle is lossless.
#[derive(Clone, Debug)]
pub struct SliceFile {
    pub kspace: KSpace<f64>,
    pub maps: CoilSensitivities<f64>,
    pub gt: Option<ComplexImage<f64>>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

// planar [.., 2, hw] -> interleaved complex64
fn put_planes(out: &mut Vec<u8>, data: &[f64], hw: usize) {
    for plane in data.chunks(2 * hw) {
        for p in 0..hw {
            out.extend_from_slice(&(plane[p] as f32).to_le_bytes());
            out.extend_from_slice(&(plane[hw + p] as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(MriError::Format(format!("truncated while reading {what} at byte {}", self.pos)));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn planes(&mut self, count: usize, hw: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(count * hw * 8, what)?;
        let mut out = vec![0.0; count * 2 * hw];
        for (ci, chunk) in raw.chunks(hw * 8).enumerate() {
            for (p, c) in chunk.chunks(8).enumerate() {
                out[ci * 2 * hw + p] = f32::from_le_bytes(c[..4].try_into().unwrap()) as f64;
                out[ci * 2 * hw + hw + p] = f32::from_le_bytes(c[4..].try_into().unwrap()) as f64;
            }
        }
        Ok(out)
    }
}

impl SliceFile {
    pub fn n_coils(&self) -> usize {
        self.kspace.n_coils()
    }

    pub fn h(&self) -> usize {
        self.kspace.h()
    }

    pub fn w(&self) -> usize {
        self.kspace.w()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (nc, h, w) = (self.n_coils(), self.h(), self.w());
        let hw = h * w;
        let mut out = Vec::with_capacity(21 + 16 * nc * hw + 8 * hw);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        for d in [nc, h, w] {
            put_u32(&mut out, d as u32);
        }
        put_planes(&mut out, self.kspace.tensor().data(), hw);
        put_planes(&mut out, self.maps.tensor().data(), hw);
        match &self.gt {
            Some(gt) => {
                out.push(1);
                put_planes(&mut out, gt.tensor().data(), hw);
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(MriError::Format("bad magic, expected SDLK".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(MriError::Format(format!("unsupported version {version}")));
        }
        let nc = r.u32("coil count")? as usize;
        let h = r.u32("height")? as usize;
        let w = r.u32("width")? as usize;
        if nc == 0 || h == 0 || w == 0 {
            return Err(MriError::Format(format!("empty dimensions {nc}x{h}x{w}")));
        }
        let hw = h * w;
        let k = r.planes(nc, hw, "k-space")?;
        let s = r.planes(nc, hw, "sensitivity maps")?;
        let gt = match r.take(1, "ground-truth flag")?[0] {
            0 => None,
            1 => Some(ComplexImage::new(Tensor::from_vec(&[2, h, w], r.planes(1, hw, "ground truth")?)?)?),
            f => return Err(MriError::Format(format!("invalid ground-truth flag {f}"))),
        };
        if r.pos != bytes.len() {
            return Err(MriError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            kspace: KSpace::new(Tensor::from_vec(&[nc, 2, h, w], k)?)?,
            maps: CoilSensitivities::new(Tensor::from_vec(&[nc, 2, h, w], s)?)?,
            gt,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Synthetic fully sampled slice.
    ///
    /// K-space and maps are rounded to single precision first; the stored
    /// ground truth is then the single-precision coil combination of exactly
    /// those stored values, so a full-mask reconstruction computed the same
    /// way reproduces it bit for bit.
    pub fn synthesize(n_coils: usize, h: usize, w: usize, seed: u64) -> Result<Self> {
        let x = make_phantom(h, w, derive_seed(seed, &[0]))?;
        let maps = make_coils(n_coils, h, w, derive_seed(seed, &[1]))?;
        let k = apply_forward(&x, &maps, &SamplingMask::full(w))?;
        let (k32, s32) = (k.cast::<f32>(), maps.cast::<f32>());
        let gt = coil_combine(&k32, &s32)?;
        Ok(Self {
            kspace: k32.cast(),
            maps: s32.cast(),
            gt: Some(gt.cast()),
        })
    }
}
