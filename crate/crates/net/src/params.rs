use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use sdl_mri::seed::{rng_for, TAG_INIT};
use sdl_tensor::{Real, Tensor};

use crate::config::ModelConfig;
use crate::error::{NetError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Normal(0, 0.02) truncated at two standard deviations.
    TruncNormal,
    /// Uniform in `±1/sqrt(fan_in)`.
    Uniform {
        fan_in: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Named trainable tensors in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<T: Real> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Adds a trainable leaf; names must be unique.
    pub fn insert(&mut self, name: &str, t: Tensor<T>) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(NetError::Param(format!("{name} registered twice")));
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(t.detach().requires_grad());
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.index
            .get(name)
            .map(|&i| &self.tensors[i])
            .ok_or_else(|| NetError::Param(format!("{name} not found")))
    }

    pub fn maybe(&self, name: &str) -> Option<&Tensor<T>> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Replaces the values of parameter `i` with a fresh leaf.
    pub fn set_data(&mut self, i: usize, data: Vec<T>) -> Result<()> {
        let shape = self.tensors[i].shape().to_vec();
        self.tensors[i] = Tensor::param(&shape, data)?;
        Ok(())
    }

    /// Same names with the given tensors, used as-is (no detaching), so that
    /// callers can route gradients to their own leaves.
    pub fn with_tensors(&self, tensors: Vec<Tensor<T>>) -> Result<Self> {
        if tensors.len() != self.len() {
            return Err(NetError::Param(format!("expected {} tensors, got {}", self.len(), tensors.len())));
        }
        for ((n, old), new) in self.iter().zip(&tensors) {
            if old.shape() != new.shape() {
                return Err(NetError::Param(format!("{n}: shape {:?} != {:?}", new.shape(), old.shape())));
            }
        }
        Ok(Self {
            names: self.names.clone(),
            tensors,
            index: self.index.clone(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(|s| s.as_str()).zip(&self.tensors)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }

    pub fn zero_grads(&self) {
        self.tensors.iter().for_each(|t| t.zero_grad());
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        let mut out = ParamStore::new();
        for (n, t) in self.iter() {
            out.insert(n, t.cast()).expect("names are unique");
        }
        out
    }
}

fn conv(name: &str, cout: usize, cin_per_group: usize, zero: bool) -> [ParamSpec; 2] {
    let fan_in = cin_per_group * 9;
    let init = if zero { Init::Zeros } else { Init::Uniform { fan_in } };
    [
        ParamSpec {
            name: format!("{name}.weight"),
            shape: vec![cout, cin_per_group, 3, 3],
            init,
        },
        ParamSpec {
            name: format!("{name}.bias"),
            shape: vec![cout],
            init,
        },
    ]
}

fn linear(name: &str, din: usize, dout: usize, zero: bool) -> [ParamSpec; 2] {
    [
        ParamSpec {
            name: format!("{name}.weight"),
            shape: vec![din, dout],
            init: if zero { Init::Zeros } else { Init::TruncNormal },
        },
        ParamSpec {
            name: format!("{name}.bias"),
            shape: vec![dout],
            init: Init::Zeros,
        },
    ]
}

fn norm(name: &str, c: usize) -> [ParamSpec; 2] {
    [
        ParamSpec {
            name: format!("{name}.weight"),
            shape: vec![c],
            init: Init::Ones,
        },
        ParamSpec {
            name: format!("{name}.bias"),
            shape: vec![c],
            init: Init::Zeros,
        },
    ]
}

/// Every parameter of the model described by `cfg`, in registration order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let mut out = Vec::new();
    let (nc2, kc, layers) = (2 * cfg.n_coils, cfg.kcnn_channels, cfg.kcnn_layers);
    for l in 0..layers {
        let cin = if l == 0 { nc2 } else { kc };
        let last = l + 1 == layers;
        let cout = if last { nc2 } else { kc };
        out.extend(conv(&format!("kcnn.{l}.conv"), cout, cin, last));
        if !last {
            out.extend(norm(&format!("kcnn.{l}.norm"), cout));
        }
    }
    if !cfg.has_transformer() {
        return out;
    }
    let (c, hidden) = (cfg.embed_dim, cfg.embed_dim * cfg.leff_ratio);
    out.extend(conv("embed", c, 2, false));
    let blocks = (0..cfg.sab_blocks())
        .map(|i| format!("sab.{i}"))
        .chain((0..cfg.dab_blocks()).map(|i| format!("dab.{i}")));
    for b in blocks {
        if cfg.pre_attn_norm {
            out.extend(norm(&format!("{b}.norm1"), c));
        }
        out.extend(linear(&format!("{b}.msa.qkv"), c, 3 * c, false));
        let span = 2 * cfg.window - 1;
        out.push(ParamSpec {
            name: format!("{b}.msa.rel_bias"),
            shape: vec![span * span, cfg.n_heads],
            init: Init::Zeros,
        });
        if cfg.enable_locality {
            out.extend(conv(&format!("{b}.msa.lcm"), c, 1, false));
        }
        out.extend(linear(&format!("{b}.msa.proj"), c, c, true));
        out.extend(norm(&format!("{b}.norm2"), c));
        out.extend(linear(&format!("{b}.ffn.fc1"), c, hidden, false));
        if cfg.enable_locality {
            out.extend(conv(&format!("{b}.ffn.dwconv"), hidden, 1, false));
        }
        out.extend(linear(&format!("{b}.ffn.fc2"), hidden, c, true));
    }
    out.extend(conv("out", 2, c, true));
    out
}

/// Total trainable scalars for `cfg`.
pub fn param_count(cfg: &ModelConfig) -> usize {
    param_specs(cfg).iter().map(|s| s.shape.iter().product::<usize>()).sum()
}

/// Draws every parameter from one seeded stream in registration order.
pub fn init_params<T: Real>(cfg: &ModelConfig, seed: u64) -> Result<ParamStore<T>> {
    cfg.validate()?;
    let mut rng = rng_for(seed, &[TAG_INIT]);
    let mut store = ParamStore::new();
    for spec in param_specs(cfg) {
        let n: usize = spec.shape.iter().product();
        let data: Vec<f64> = match spec.init {
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::TruncNormal => (0..n)
                .map(|_| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= 2.0 {
                        break 0.02 * z;
                    }
                })
                .collect(),
            Init::Uniform { fan_in } => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
            }
        };
        store.insert(&spec.name, Tensor::from_f64(&spec.shape, &data)?)?;
    }
    Ok(store)
}
