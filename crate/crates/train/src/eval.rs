use std::path::Path;

use sdl_metrics::{psnr, ssim, MagnitudeImage};
use sdl_mri::{zero_filled, ComplexImage};
use sdl_net::{sdlformer_forward, ModelConfig, ParamStore};
use sdl_tensor::{no_grad, Real};
use serde::Serialize;

use crate::data::{Dataset, Prepared, Split};
use crate::error::{io_err, Result, TrainError};

pub const ZF: &str = "ZF";
pub const MODEL: &str = "model";
pub const MEAN: &str = "mean";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRow {
    pub slice_id: String,
    pub method: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Magnitude in working precision, widened afterwards, so that images that
/// agree bitwise give an infinite PSNR.
fn magnitude<T: Real>(x: &ComplexImage<T>) -> Result<MagnitudeImage> {
    Ok(MagnitudeImage::new(
        x.h(),
        x.w(),
        x.magnitude().iter().map(|v| v.as_f64()).collect(),
    )?)
}

fn row<T: Real>(id: &str, method: &str, reference: &MagnitudeImage, x: &ComplexImage<T>) -> Result<EvalRow> {
    let m = magnitude(x)?;
    Ok(EvalRow {
        slice_id: id.to_string(),
        method: method.to_string(),
        psnr_db: psnr(reference, &m)?,
        ssim: ssim(reference, &m)?,
    })
}

/// Per-slice zero-filled and model rows for the slices of `split` acquired
/// at `accel`, followed by the unweighted mean of each method.
pub fn evaluate<T: Real>(
    data: &Dataset,
    split: Option<Split>,
    accel: u32,
    model: &ModelConfig,
    params: &ParamStore<T>,
) -> Result<Vec<EvalRow>> {
    let mut zf_rows = Vec::new();
    let mut model_rows = Vec::new();
    for s in data.slices.iter().filter(|s| split.is_none_or(|sp| s.split == sp)) {
        let p = Prepared::<T>::new(s, accel)?;
        let reference = magnitude(&p.reference)?;
        zf_rows.push(row(&p.id, ZF, &reference, &zero_filled(&p.y, &p.maps)?)?);
        let rec = no_grad(|| sdlformer_forward(&p.y, &p.maps, &p.mask, model, params))?;
        model_rows.push(row(&p.id, MODEL, &reference, &rec.image)?);
    }
    if zf_rows.is_empty() {
        return Err(TrainError::Config("no slices to evaluate".into()));
    }
    let mut out = Vec::new();
    for (a, b) in zf_rows.iter().zip(&model_rows) {
        out.push(a.clone());
        out.push(b.clone());
    }
    for (method, rows) in [(ZF, &zf_rows), (MODEL, &model_rows)] {
        let n = rows.len() as f64;
        out.push(EvalRow {
            slice_id: MEAN.into(),
            method: method.into(),
            psnr_db: rows.iter().map(|r| r.psnr_db).sum::<f64>() / n,
            ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
        });
    }
    Ok(out)
}

/// Mean row of `method`.
pub fn mean_of<'a>(rows: &'a [EvalRow], method: &str) -> Option<&'a EvalRow> {
    rows.iter().find(|r| r.slice_id == MEAN && r.method == method)
}

pub fn eval_csv(rows: &[EvalRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| TrainError::Format(e.to_string()))
}

pub fn write_eval(path: &Path, rows: &[EvalRow]) -> Result<()> {
    std::fs::write(path, eval_csv(rows)?).map_err(io_err(path))
}
