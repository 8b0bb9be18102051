#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdl_net::{ModelConfig, ParamStore};
use sdl_tensor::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_tensor(r: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.gen_range(-scale..scale)).collect()).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Overwrites every parameter with uniform noise, so zero-initialized
/// branches become active.
pub fn randomize(store: &mut ParamStore<f64>, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for i in 0..store.len() {
        let n = store.tensors()[i].numel();
        store.set_data(i, (0..n).map(|_| r.gen_range(-scale..scale)).collect()).unwrap();
    }
}

pub fn tiny_config(n_coils: usize) -> ModelConfig {
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
