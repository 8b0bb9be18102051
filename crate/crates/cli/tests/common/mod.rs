#![allow(dead_code)]

use std::path::PathBuf;

use sdl_mri::SliceFile;
use sdl_net::{init_params, ModelConfig};
use sdl_train::{model_checkpoint, Checkpoint, MetricsSnapshot, ModelMeta, TrainConfig};

/// Set to rewrite the golden files from the current implementation.
pub const BLESS_ENV: &str = "SDLF_BLESS";

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn golden_model() -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        n_heads: 2,
        window: 4,
        leff_ratio: 2,
        n_sab: 1,
        n_dab: 1,
        kcnn_channels: 4,
        kcnn_layers: 3,
        n_coils: 2,
        ..Default::default()
    }
}

pub fn golden_slice() -> SliceFile {
    SliceFile::synthesize(2, 16, 16, 3).unwrap()
}

pub fn golden_checkpoint() -> Checkpoint {
    let model = golden_model();
    let params = init_params::<f32>(&model, 7).unwrap();
    let meta = ModelMeta {
        model,
        train: TrainConfig::default(),
        metrics: MetricsSnapshot {
            epochs_run: 0,
            best_epoch: 0,
            best_val_loss: 0.0,
            final_val_loss: 0.0,
            final_train_loss: 0.0,
        },
    };
    model_checkpoint(&params, &meta).unwrap()
}

/// Golden bytes of `name`, rewritten first when blessing.
pub fn golden(name: &str, fresh: &[u8]) -> Vec<u8> {
    let path = golden_dir().join(name);
    if std::env::var_os(BLESS_ENV).is_some() {
        std::fs::write(&path, fresh).unwrap();
    }
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}; run with {BLESS_ENV}=1 to create it", path.display()))
}

/// Checks both golden files; `Err` names the first mismatch.
pub fn check_goldens() -> Result<(), String> {
    let slice = golden_slice().to_bytes();
    let want = golden("tiny.sdlk", &slice);
    if slice != want {
        return Err("regenerated tiny.sdlk differs from the golden bytes".into());
    }
    let loaded = SliceFile::from_bytes(&want).map_err(|e| e.to_string())?;
    if loaded.to_bytes() != want {
        return Err("tiny.sdlk changes under load/save".into());
    }

    let ckpt = golden_checkpoint().to_bytes().unwrap();
    let want = golden("tiny.sdlc", &ckpt);
    if ckpt != want {
        return Err("regenerated tiny.sdlc differs from the golden bytes".into());
    }
    let loaded = Checkpoint::from_bytes(&want).map_err(|e| e.to_string())?;
    if loaded.to_bytes().unwrap() != want {
        return Err("tiny.sdlc changes under load/save".into());
    }
    let (meta, params) = sdl_train::load_model::<f32>(&loaded).map_err(|e| e.to_string())?;
    if meta.model != golden_model() || params.numel() != sdl_net::param_count(&golden_model()) {
        return Err("tiny.sdlc does not describe the golden model".into());
    }
    Ok(())
}
