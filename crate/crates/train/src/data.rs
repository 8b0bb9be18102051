//! Slice datasets: a directory of SDLK files plus `manifest.csv` with the
//! columns `file`, `seed`, `split`.

use std::fmt;
use std::path::Path;

use sdl_mri::seed::{derive_seed, TAG_MASK, TAG_PHANTOM};
use sdl_mri::{coil_combine, default_acs_frac, make_mask, mask_kspace, CoilSensitivities, ComplexImage, KSpace, SamplingMask, SliceFile};
use sdl_tensor::Real;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, TrainError};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            _ => Err(format!("unknown split {s:?} (expected train or val)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub seed: u64,
    pub split: Split,
}

#[derive(Clone, Debug)]
pub struct Slice {
    /// File stem, used as the slice id in reports.
    pub id: String,
    pub seed: u64,
    pub split: Split,
    pub data: SliceFile,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub slices: Vec<Slice>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        rows.push(row.map_err(|e| TrainError::Format(format!("{}: {e}", path.display())))?);
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| TrainError::Format(e.to_string()))?;
    std::fs::write(path, bytes).map_err(io_err(path))
}

impl Dataset {
    /// `n` synthetic slices; the last `n_val` form the validation split.
    pub fn synthetic(n: usize, n_val: usize, h: usize, w: usize, n_coils: usize, seed: u64) -> Result<Self> {
        if n_val > n {
            return Err(TrainError::Config(format!("{n_val} validation slices requested out of {n}")));
        }
        let digits = n.saturating_sub(1).to_string().len().max(3);
        let slices = (0..n)
            .map(|i| {
                let s = derive_seed(seed, &[TAG_PHANTOM, i as u64]) >> 1;
                Ok(Slice {
                    id: format!("slice_{i:0digits$}"),
                    seed: s,
                    split: if i + n_val >= n { Split::Val } else { Split::Train },
                    data: SliceFile::synthesize(n_coils, h, w, s)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { slices })
    }

    /// Writes every slice as `<id>.sdlk` and the manifest.
    pub fn save(&self, dir: &Path) -> Result<Vec<ManifestRow>> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut rows = Vec::new();
        for s in &self.slices {
            let file = format!("{}.sdlk", s.id);
            s.data.save(dir.join(&file))?;
            rows.push(ManifestRow {
                file,
                seed: s.seed,
                split: s.split,
            });
        }
        write_manifest(&dir.join(MANIFEST), &rows)?;
        Ok(rows)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let rows = read_manifest(&dir.join(MANIFEST))?;
        let mut slices = Vec::new();
        for r in rows {
            let path = dir.join(&r.file);
            let data = SliceFile::load(&path).map_err(|e| match e {
                sdl_mri::MriError::Io(source) => TrainError::Io {
                    path: path.display().to_string(),
                    source,
                },
                other => TrainError::Format(format!("{}: {other}", path.display())),
            })?;
            let id = Path::new(&r.file)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| r.file.clone());
            slices.push(Slice {
                id,
                seed: r.seed,
                split: r.split,
                data,
            });
        }
        let ds = Self { slices };
        ds.check_uniform()?;
        Ok(ds)
    }

    fn check_uniform(&self) -> Result<()> {
        let Some(first) = self.slices.first() else {
            return Err(TrainError::Format("manifest lists no slices".into()));
        };
        let dims = |s: &Slice| (s.data.n_coils(), s.data.h(), s.data.w());
        for s in &self.slices {
            if dims(s) != dims(first) {
                return Err(TrainError::Format(format!(
                    "slice {} has (coils, h, w) = {:?}, expected {:?}",
                    s.id,
                    dims(s),
                    dims(first)
                )));
            }
        }
        Ok(())
    }

    pub fn n_coils(&self) -> usize {
        self.slices.first().map_or(0, |s| s.data.n_coils())
    }

    pub fn of_split(&self, split: Split) -> impl Iterator<Item = &Slice> {
        self.slices.iter().filter(move |s| s.split == split)
    }
}

/// Acquisition mask of a slice at `accel`, keyed by the slice seed.
pub fn acquisition_mask(slice_seed: u64, w: usize, accel: u32) -> Result<SamplingMask> {
    Ok(make_mask(
        w,
        accel,
        default_acs_frac(accel),
        derive_seed(slice_seed, &[TAG_MASK, accel as u64]),
    )?)
}

/// A slice in working precision with its acquisition applied.
#[derive(Clone, Debug)]
pub struct Prepared<T: Real> {
    pub id: String,
    pub seed: u64,
    /// Undersampled measurements `M ⊙ y`.
    pub y: KSpace<T>,
    pub maps: CoilSensitivities<T>,
    pub mask: SamplingMask,
    /// Stored ground truth, or the coil combination of the stored k-space.
    pub reference: ComplexImage<T>,
}

impl<T: Real> Prepared<T> {
    pub fn new(slice: &Slice, accel: u32) -> Result<Self> {
        let full: KSpace<T> = slice.data.kspace.cast();
        let maps: CoilSensitivities<T> = slice.data.maps.cast();
        let mask = acquisition_mask(slice.seed, full.w(), accel)?;
        let reference = match &slice.data.gt {
            Some(gt) => gt.cast(),
            None => coil_combine(&full, &maps)?,
        };
        Ok(Self {
            id: slice.id.clone(),
            seed: slice.seed,
            y: mask_kspace(&full, &mask)?,
            maps,
            mask,
            reference,
        })
    }
}
