use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Loss on held-out k-space entries only.
    Ssl,
    /// Image-domain L1 against the reference.
    Supervised,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ssl" => Ok(Mode::Ssl),
            "supervised" => Ok(Mode::Supervised),
            _ => Err(format!("unknown mode {s:?} (expected ssl or supervised)")),
        }
    }
}

/// Optimization settings. Batches are always a single slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Epochs between learning-rate decays.
    pub sched_step: usize,
    pub sched_gamma: f64,
    pub mode: Mode,
    pub seed: u64,
    pub accel: u32,
    /// Fraction of non-ACS acquired columns routed to the network input.
    pub rho: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            lr: 1e-3,
            sched_step: 40,
            sched_gamma: 0.1,
            mode: Mode::Ssl,
            seed: 0,
            accel: 4,
            rho: 0.6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(TrainError::Config(m));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr {} must be positive", self.lr));
        }
        if self.sched_step == 0 {
            return fail("sched_step must be at least 1".into());
        }
        if !(self.sched_gamma > 0.0 && self.sched_gamma <= 1.0) {
            return fail(format!("sched_gamma {} must lie in (0, 1]", self.sched_gamma));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail(format!("rho {} must lie in (0, 1)", self.rho));
        }
        if self.accel == 0 {
            return fail("accel must be at least 1".into());
        }
        if self.seed > i64::MAX as u64 {
            return fail(format!("seed {} must be below 2^63", self.seed));
        }
        Ok(())
    }
}

/// Step schedule: `lr * gamma^(epoch / sched_step)`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr * cfg.sched_gamma.powi((epoch / cfg.sched_step) as i32)
}
