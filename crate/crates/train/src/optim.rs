use sdl_net::ParamStore;
use sdl_tensor::Real;

use crate::error::{Result, TrainError};

/// Adam moments, kept in `f64` whatever the parameter precision.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new<T: Real>(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from the gradients held by `params`.
/// Parameters without a gradient are left untouched. No weight decay.
pub fn adam_step<T: Real>(params: &mut ParamStore<T>, state: &mut OptimState, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(TrainError::Config(format!(
            "optimizer holds {} moments for {} parameters",
            state.m.len(),
            params.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let (c1, c2) = (1.0 - state.beta1.powi(t), 1.0 - state.beta2.powi(t));
    for i in 0..params.len() {
        let Some(g) = params.tensors()[i].grad() else { continue };
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let theta: Vec<T> = params.tensors()[i]
            .data()
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let g = g[j].as_f64();
                m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
                v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
                let (mh, vh) = (m[j] / c1, v[j] / c2);
                T::of(p.as_f64() - lr * mh / (vh.sqrt() + state.eps))
            })
            .collect();
        params.set_data(i, theta)?;
    }
    Ok(())
}
