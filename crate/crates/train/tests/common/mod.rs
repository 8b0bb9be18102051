#![allow(dead_code)]

use sdl_net::ModelConfig;
use sdl_train::{Dataset, TrainConfig};

pub fn tiny_model(n_coils: usize) -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        n_heads: 2,
        window: 4,
        leff_ratio: 2,
        n_sab: 1,
        n_dab: 1,
        kcnn_channels: 4,
        kcnn_layers: 3,
        n_coils,
        ..Default::default()
    }
}

/// Eight 32x32 two-coil slices, the last two for validation.
pub fn smoke_data() -> Dataset {
    Dataset::synthetic(8, 2, 32, 32, 2, 11).unwrap()
}

pub fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        seed: 5,
        ..Default::default()
    }
}
