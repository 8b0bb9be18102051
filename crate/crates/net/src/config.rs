use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub n_heads: usize,
    /// Window side `M`; each window holds `M * M` tokens.
    pub window: usize,
    pub leff_ratio: usize,
    pub n_sab: usize,
    pub n_dab: usize,
    pub kcnn_channels: usize,
    pub kcnn_layers: usize,
    pub n_coils: usize,
    pub enable_sab: bool,
    pub enable_dab: bool,
    /// LCM and the LeFF depth-wise convolution.
    pub enable_locality: bool,
    /// Layer norm before the attention branch as well as before LeFF.
    pub pre_attn_norm: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            n_heads: 4,
            window: 8,
            leff_ratio: 4,
            n_sab: 2,
            n_dab: 2,
            kcnn_channels: 32,
            kcnn_layers: 5,
            n_coils: 4,
            enable_sab: true,
            enable_dab: true,
            enable_locality: true,
            pre_attn_norm: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(NetError::Config(m));
        if self.embed_dim == 0 || self.n_heads == 0 || !self.embed_dim.is_multiple_of(self.n_heads) {
            return fail(format!(
                "embed_dim {} must be a positive multiple of n_heads {}",
                self.embed_dim, self.n_heads
            ));
        }
        if self.window == 0 {
            return fail("window must be positive".into());
        }
        if self.leff_ratio == 0 {
            return fail("leff_ratio must be positive".into());
        }
        if self.kcnn_layers < 2 || self.kcnn_channels == 0 {
            return fail(format!(
                "k-space CNN needs at least 2 layers and 1 channel, got {} x {}",
                self.kcnn_layers, self.kcnn_channels
            ));
        }
        if self.n_coils == 0 {
            return fail("n_coils must be positive".into());
        }
        Ok(())
    }

    pub fn sab_blocks(&self) -> usize {
        if self.enable_sab {
            self.n_sab
        } else {
            0
        }
    }

    pub fn dab_blocks(&self) -> usize {
        if self.enable_dab {
            self.n_dab
        } else {
            0
        }
    }

    pub fn has_transformer(&self) -> bool {
        self.sab_blocks() + self.dab_blocks() > 0
    }

    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.n_heads
    }
}
