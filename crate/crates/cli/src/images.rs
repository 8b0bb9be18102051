use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, ImageFormat};

use crate::error::{CliError, Kind, Result};

pub fn format_for(path: &Path) -> Result<ImageFormat> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("png") => Ok(ImageFormat::Png),
        Some("pgm") => Ok(ImageFormat::Pnm),
        _ => Err(CliError::new(
            Kind::Usage,
            format!("{}: output must end in .png or .pgm", path.display()),
        )),
    }
}

/// `<stem>_residual.<ext>` next to `path`.
pub fn residual_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_residual.{ext}"))
}

/// Maps `values` linearly so that `lo` is 0 and `hi` is 255, clamping the
/// rest. Returns the number of clamped pixels.
pub fn quantize(values: &[f64], lo: f64, hi: f64) -> (Vec<u8>, usize) {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut clamped = 0;
    let px = values
        .iter()
        .map(|&v| {
            let q = ((v - lo) / span * 255.0).round();
            if !(0.0..=255.0).contains(&q) {
                clamped += 1;
            }
            q.clamp(0.0, 255.0) as u8
        })
        .collect();
    (px, clamped)
}

pub fn write_gray(path: &Path, h: usize, w: usize, pixels: Vec<u8>) -> Result<()> {
    let fmt = format_for(path)?;
    let io = |e: &dyn std::fmt::Display| CliError::new(Kind::Io, format!("{}: {e}", path.display()));
    let mut buf = Vec::new();
    if fmt == ImageFormat::Pnm {
        // binary PGM (P5) rather than the encoder's default PAM
        PnmEncoder::new(&mut buf)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(&pixels, w as u32, h as u32, ExtendedColorType::L8)
            .map_err(|e| io(&e))?;
    } else {
        let img = GrayImage::from_raw(w as u32, h as u32, pixels).expect("pixel count matches size");
        img.write_to(&mut std::io::Cursor::new(&mut buf), fmt).map_err(|e| io(&e))?;
    }
    std::fs::write(path, buf).map_err(|e| io(&e))
}
