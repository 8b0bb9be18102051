use std::path::PathBuf;

use clap::builder::TypedValueParser;
use clap::{Parser, Subcommand};
use sdl_train::{Mode, Split};

#[derive(Debug, Parser)]
#[command(
    name = "sdlformer",
    version,
    about = "Multi-coil MRI reconstruction with a sparse and dense window transformer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("size {s:?} is not HxW"))?;
    let p = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("size {s:?} is not HxW"));
    Ok((p(h)?, p(w)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitArg {
    Train,
    Val,
    All,
}

impl SplitArg {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::All => None,
        }
    }
}

fn parse_split(s: &str) -> Result<SplitArg, String> {
    match s {
        "train" => Ok(SplitArg::Train),
        "val" => Ok(SplitArg::Val),
        "all" => Ok(SplitArg::All),
        _ => Err(format!("unknown split {s:?} (expected train, val or all)")),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic slices and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        slices: usize,
        /// Slice size as HxW.
        #[arg(long, value_parser = parse_size, default_value = "64x64")]
        size: (usize, usize),
        #[arg(long, default_value_t = 4)]
        coils: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of validation slices, taken from the end (default: a quarter).
        #[arg(long)]
        val: Option<usize>,
    },
    /// Train a model and keep the parameters with the best validation loss.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, conflicts_with = "resume")]
        config: Option<PathBuf>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(["4", "5"]).map(|s| s.parse::<u32>().unwrap()), conflicts_with = "resume")]
        accel: Option<u32>,
        #[arg(long, value_parser = parse_mode, conflicts_with = "resume")]
        mode: Option<Mode>,
        /// Checkpoint path; the log goes to `<out>.log.csv` and the
        /// resumable state to `<out>.last`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "resume")]
        no_sab: bool,
        #[arg(long, conflicts_with = "resume")]
        no_dab: bool,
        #[arg(long, conflicts_with = "resume")]
        no_locality: bool,
        #[arg(long, conflicts_with = "resume")]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from `<out>.last`.
        #[arg(long)]
        resume: bool,
    },
    /// PSNR and SSIM of zero-filled and model reconstructions.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Acceleration to acquire at (default: the training acceleration).
        #[arg(long)]
        accel: Option<u32>,
        #[arg(long, value_parser = parse_split, default_value = "all")]
        split: SplitArg,
    },
    /// Reconstruct one slice to an 8-bit image (.png or .pgm).
    Recon {
        #[arg(long)]
        slice: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        accel: Option<u32>,
        /// Seed of the acquisition mask (default: the slice's manifest entry).
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}
