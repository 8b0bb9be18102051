use std::path::{Path, PathBuf};

use sdl_metrics::{psnr, ssim, MagnitudeImage};
use sdl_mri::{ComplexImage, SliceFile};
use sdl_net::sdlformer_forward;
use sdl_tensor::{no_grad, DType, Real};
use sdl_train::{
    evaluate, load_model, mean_of, read_manifest, write_eval, write_log, Checkpoint, Dataset, Prepared, Slice, Split, Trainer, MANIFEST,
    MODEL, ZF,
};

use crate::cli::{Command, SplitArg};
use crate::config::{load_run_config, resolve_seed, RunConfig};
use crate::error::{CliError, Kind, Result};
use crate::images::{format_for, quantize, residual_path, write_gray};

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            out,
            slices,
            size,
            coils,
            seed,
            val,
        } => synth(&out, slices, size, coils, seed, val),
        Command::Train {
            data,
            config,
            accel,
            mode,
            out,
            no_sab,
            no_dab,
            no_locality,
            seed,
            epochs,
            resume,
        } => {
            let opts = TrainOpts {
                config,
                accel,
                mode,
                no_sab,
                no_dab,
                no_locality,
                seed,
                epochs,
                resume,
            };
            train(&data, &out, &opts)
        }
        Command::Eval {
            data,
            ckpt,
            out,
            accel,
            split,
        } => eval(&data, &ckpt, &out, accel, split),
        Command::Recon {
            slice,
            ckpt,
            out,
            accel,
            seed,
        } => recon(&slice, &ckpt, &out, accel, seed),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn log_path(ckpt: &Path) -> PathBuf {
    with_suffix(ckpt, ".log.csv")
}

pub fn state_path(ckpt: &Path) -> PathBuf {
    with_suffix(ckpt, ".last")
}

fn synth(out: &Path, n: usize, (h, w): (usize, usize), coils: usize, seed: Option<u64>, val: Option<usize>) -> Result<()> {
    if n == 0 {
        return Err(CliError::new(Kind::Usage, "--slices must be at least 1"));
    }
    if h < 8 || w < 8 {
        return Err(CliError::new(Kind::Usage, format!("size {h}x{w} is below the 8x8 minimum")));
    }
    if coils == 0 {
        return Err(CliError::new(Kind::Usage, "--coils must be at least 1"));
    }
    let seed = resolve_seed(seed, None, 0)?;
    let n_val = val.unwrap_or(n / 4);
    let ds = Dataset::synthetic(n, n_val, h, w, coils, seed)?;
    ds.save(out)?;
    println!(
        "wrote {n} slices ({} train, {n_val} val) of {h}x{w} with {coils} coils to {}",
        n - n_val,
        out.display()
    );
    Ok(())
}

pub struct TrainOpts {
    pub config: Option<PathBuf>,
    pub accel: Option<u32>,
    pub mode: Option<sdl_train::Mode>,
    pub no_sab: bool,
    pub no_dab: bool,
    pub no_locality: bool,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub resume: bool,
}

fn fresh_trainer(data: &Dataset, opts: &TrainOpts) -> Result<Trainer<f32>> {
    let (mut run, file_seed) = match &opts.config {
        Some(p) => {
            let (cfg, has_seed) = load_run_config(p)?;
            let s = has_seed.then_some(cfg.train.seed);
            (cfg, s)
        }
        None => (RunConfig::default(), None),
    };
    run.train.seed = resolve_seed(opts.seed, file_seed, 0)?;
    if let Some(a) = opts.accel {
        run.train.accel = a;
    }
    if !matches!(run.train.accel, 4 | 5) {
        return Err(CliError::new(
            Kind::Config,
            format!("training accel must be 4 or 5, got {}", run.train.accel),
        ));
    }
    if let Some(m) = opts.mode {
        run.train.mode = m;
    }
    if let Some(e) = opts.epochs {
        run.train.epochs = e;
    }
    run.model.enable_sab &= !opts.no_sab;
    run.model.enable_dab &= !opts.no_dab;
    run.model.enable_locality &= !opts.no_locality;
    // the coil count always follows the data
    run.model.n_coils = data.n_coils();
    Ok(Trainer::new(data, run.model, run.train)?)
}

fn write_outputs(t: &Trainer<f32>, out: &Path) -> sdl_train::Result<()> {
    t.best_checkpoint()?.save(out)?;
    write_log(&log_path(out), t.log())?;
    let state = state_path(out);
    let tmp = with_suffix(&state, ".tmp");
    t.state_checkpoint()?.save(&tmp)?;
    std::fs::rename(&tmp, &state).map_err(|source| sdl_train::TrainError::Io {
        path: state.display().to_string(),
        source,
    })
}

fn train(data_dir: &Path, out: &Path, opts: &TrainOpts) -> Result<()> {
    let data = Dataset::load(data_dir)?;
    let mut trainer = if opts.resume {
        let state = Checkpoint::load(&state_path(out))?;
        let mut t = Trainer::<f32>::resume(&data, &state)?;
        if let Some(e) = opts.epochs {
            t.set_epochs(e)?;
        }
        t
    } else {
        fresh_trainer(&data, opts)?
    };
    println!("parameters: {}", trainer.params().numel());
    let total = trainer.train_config().epochs;
    trainer.run(|t| {
        let log = t.log();
        let (tr, va) = (&log[log.len() - 2], &log[log.len() - 1]);
        println!(
            "epoch {}/{total} train {:.6} val {:.6} lr {:e}",
            va.epoch + 1,
            tr.loss,
            va.loss,
            va.lr
        );
        write_outputs(t, out)
    })?;
    if trainer.log().is_empty() {
        return Err(CliError::new(Kind::Train, "no epochs were run"));
    }
    write_outputs(&trainer, out)?;
    println!("final validation loss: {}", trainer.final_val_loss());
    println!(
        "best validation loss: {} (epoch {})",
        trainer.best_val_loss(),
        trainer.best_epoch() + 1
    );
    Ok(())
}

fn dtype_of(ck: &Checkpoint) -> Result<DType> {
    ck.dtype()
        .ok_or_else(|| CliError::new(Kind::Format, "checkpoint is empty or mixes precisions"))
}

fn eval(data_dir: &Path, ckpt: &Path, out: &Path, accel: Option<u32>, split: SplitArg) -> Result<()> {
    let ck = Checkpoint::load(ckpt)?;
    let data = Dataset::load(data_dir)?;
    match dtype_of(&ck)? {
        DType::F32 => eval_with::<f32>(&data, &ck, out, accel, split),
        DType::F64 => eval_with::<f64>(&data, &ck, out, accel, split),
    }
}

fn eval_with<T: Real>(data: &Dataset, ck: &Checkpoint, out: &Path, accel: Option<u32>, split: SplitArg) -> Result<()> {
    let (meta, params) = load_model::<T>(ck)?;
    let accel = accel.unwrap_or(meta.train.accel);
    let rows = evaluate(data, split.split(), accel, &meta.model, &params)?;
    write_eval(out, &rows)?;
    for m in [ZF, MODEL] {
        let r = mean_of(&rows, m).expect("mean rows are always present");
        println!("{m}: mean PSNR {:.4} dB, mean SSIM {:.4}", r.psnr_db, r.ssim);
    }
    Ok(())
}

fn recon(slice_path: &Path, ckpt: &Path, out: &Path, accel: Option<u32>, seed: Option<u64>) -> Result<()> {
    format_for(out)?;
    let file = SliceFile::load(slice_path)
        .map_err(|e| CliError::new(CliError::from(e).kind, format!("{}: slice unreadable", slice_path.display())))?;
    let ck = Checkpoint::load(ckpt)?;
    let seed = resolve_seed(seed, manifest_seed(slice_path), 0)?;
    let id = slice_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let slice = Slice {
        id,
        seed,
        split: Split::Val,
        data: file,
    };
    match dtype_of(&ck)? {
        DType::F32 => recon_with::<f32>(&slice, &ck, out, accel),
        DType::F64 => recon_with::<f64>(&slice, &ck, out, accel),
    }
}

/// Seed listed for the slice in a manifest beside it, if any.
fn manifest_seed(slice_path: &Path) -> Option<u64> {
    let dir = slice_path.parent()?;
    let name = slice_path.file_name()?.to_str()?;
    let rows = read_manifest(&dir.join(MANIFEST)).ok()?;
    rows.into_iter().find(|r| r.file == name).map(|r| r.seed)
}

fn magnitude<T: Real>(x: &ComplexImage<T>) -> Result<MagnitudeImage> {
    MagnitudeImage::new(x.h(), x.w(), x.magnitude().iter().map(|v| v.as_f64()).collect())
        .map_err(|e| CliError::new(Kind::Train, e.to_string()))
}

fn recon_with<T: Real>(slice: &Slice, ck: &Checkpoint, out: &Path, accel: Option<u32>) -> Result<()> {
    let (meta, params) = load_model::<T>(ck)?;
    let accel = accel.unwrap_or(meta.train.accel);
    let p = Prepared::<T>::new(slice, accel)?;
    let rec = no_grad(|| sdlformer_forward(&p.y, &p.maps, &p.mask, &meta.model, &params))?;
    let mag = magnitude(&rec.image)?;
    let (h, w) = (mag.h(), mag.w());
    let lo = mag.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mag.max();
    let (px, _) = quantize(mag.data(), lo, hi);
    write_gray(out, h, w, px)?;
    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut side = vec![
        format!("image {} min {lo:e} max {hi:e}", name(out)),
        format!("acquisition accel {accel} seed {}", slice.seed),
    ];
    if slice.data.gt.is_some() {
        let reference = magnitude(&p.reference)?;
        let err: Vec<f64> = mag.data().iter().zip(reference.data()).map(|(a, b)| 5.0 * (a - b).abs()).collect();
        let (px, clamped) = quantize(&err, 0.0, hi - lo);
        let rpath = residual_path(out);
        write_gray(&rpath, h, w, px)?;
        side.push(format!(
            "residual {} value 5*|error| min 0 max {:e} clamped {clamped}",
            name(&rpath),
            hi - lo
        ));
        let metric = |e: sdl_metrics::MetricError| CliError::new(Kind::Train, e.to_string());
        side.push(format!("psnr_db {}", psnr(&reference, &mag).map_err(metric)?));
        side.push(format!("ssim {}", ssim(&reference, &mag).map_err(metric)?));
    } else {
        eprintln!("notice: {} has no ground truth; residual image skipped", slice.id);
        side.push("residual none (no ground truth)".into());
    }
    let sidecar = out.with_extension("txt");
    std::fs::write(&sidecar, side.join("\n") + "\n").map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", sidecar.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}
