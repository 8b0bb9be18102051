//! Run configuration files.
//!
//! ```toml
//! [model]
//! embed_dim = 16
//! n_heads = 2
//!
//! [train]
//! epochs = 60
//! seed = 1
//! ```
//!
//! Every key of [`ModelConfig`] and [`TrainConfig`] may appear; unknown keys
//! are rejected. Command-line flags override the file, the file overrides
//! the `SDLF_SEED` environment variable (seed only), which overrides the
//! built-in defaults.

use std::path::Path;

use sdl_net::ModelConfig;
use sdl_train::TrainConfig;
use serde::Deserialize;

use crate::error::{CliError, Kind, Result};

pub const SEED_ENV: &str = "SDLF_SEED";

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

/// Parsed file plus whether it set the seed itself.
pub fn parse_run_config(text: &str) -> Result<(RunConfig, bool)> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::new(Kind::Config, one_line(&e.to_string())))?;
    let has_seed = table.get("train").and_then(|t| t.get("seed")).is_some();
    let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::new(Kind::Config, one_line(&e.to_string())))?;
    Ok((cfg, has_seed))
}

pub fn load_run_config(path: &Path) -> Result<(RunConfig, bool)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", path.display())))?;
    parse_run_config(&text).map_err(|e| CliError::new(e.kind, format!("{}: {}", path.display(), e.message)))
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Seed from the environment, if set.
pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::new(Kind::Config, format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then file, then environment, then `default`.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, default: u64) -> Result<u64> {
    Ok(match (flag, file) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?.unwrap_or(default),
    })
}
