use sdl_mri::{coil_combine, data_consistency_kspace, CoilSensitivities, ComplexImage, KSpace, SamplingMask};
use sdl_tensor::Real;

use crate::attention::AttnPlan;
use crate::block::{let_block, BlockParams};
use crate::config::ModelConfig;
use crate::error::{NetError, Result};
use crate::kspace_cnn::{kspace_cnn, KcnnParams};
use crate::layout::{crop, reflect_pad, WindowLayout, WindowMode};
use crate::params::{init_params, ParamStore};

/// Network output.
#[derive(Clone, Debug)]
pub struct Reconstruction<T: Real> {
    /// Coil combination of `kspace`.
    pub image: ComplexImage<T>,
    /// Per-coil k-space after the terminal consistency step; equals the
    /// input measurements wherever the mask is set.
    pub kspace: KSpace<T>,
    /// Image-domain output before the terminal consistency step.
    pub pre_dc: ComplexImage<T>,
}

/// Model configuration and its parameters.
#[derive(Clone, Debug)]
pub struct Sdlformer<T: Real> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

impl<T: Real> Sdlformer<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn forward(&self, y1: &KSpace<T>, s: &CoilSensitivities<T>, m1: &SamplingMask) -> Result<Reconstruction<T>> {
        sdlformer_forward(y1, s, m1, &self.config, &self.params)
    }
}

/// k-space CNN, consistency with `y1`, coil combination, sparse then dense
/// transformer blocks with a global residual, and terminal consistency.
pub fn sdlformer_forward<T: Real>(
    y1: &KSpace<T>,
    s: &CoilSensitivities<T>,
    m1: &SamplingMask,
    cfg: &ModelConfig,
    params: &ParamStore<T>,
) -> Result<Reconstruction<T>> {
    cfg.validate()?;
    if y1.n_coils() != cfg.n_coils || s.n_coils() != cfg.n_coils {
        return Err(NetError::Config(format!(
            "model built for {} coils, got k-space with {} and maps with {}",
            cfg.n_coils,
            y1.n_coils(),
            s.n_coils()
        )));
    }
    let (h, w) = (y1.h(), y1.w());
    let kcnn = KcnnParams::from_store(params, cfg.kcnn_layers)?;
    let k = KSpace::new(kspace_cnn(y1.tensor(), &kcnn)?)?;
    let mask = m1.expand(cfg.n_coils, h);
    let k_dc = KSpace::new(k.tensor().masked_replace(y1.tensor().data(), &mask)?)?;
    let x0 = coil_combine(&k_dc, s)?;

    let x = if cfg.has_transformer() {
        let m = cfg.window;
        let xp = reflect_pad(x0.tensor(), m)?;
        let (hp, wp) = (xp.shape()[1], xp.shape()[2]);
        let mut f = xp.conv2d(params.get("embed.weight")?, params.get("embed.bias")?, 1, 1)?;
        let plan = AttnPlan::new((hp / m) * (wp / m), m, cfg.embed_dim, cfg.n_heads)?;
        let stages = [
            ("sab", WindowMode::Sparse, cfg.sab_blocks()),
            ("dab", WindowMode::Dense, cfg.dab_blocks()),
        ];
        for (name, mode, count) in stages {
            if count == 0 {
                continue;
            }
            let layout = WindowLayout::new(mode, hp, wp, m)?;
            for i in 0..count {
                let bp = BlockParams::from_store(params, &format!("{name}.{i}"))?;
                f = let_block(&f, &layout, &plan, &bp, cfg.enable_locality)?;
            }
        }
        let out = f.conv2d(params.get("out.weight")?, params.get("out.bias")?, 1, 1)?;
        ComplexImage::new(x0.tensor().add(&crop(&out, h, w)?)?)?
    } else {
        x0
    };

    let kspace = data_consistency_kspace(&x, y1, s, m1)?;
    Ok(Reconstruction {
        image: coil_combine(&kspace, s)?,
        kspace,
        pre_dc: x,
    })
}
