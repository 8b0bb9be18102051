//! SDLC named-tensor archives.
//!
//! Little-endian layout: magic `SDLC`, u32 version, u32 tensor count; per
//! tensor a u16 name length, the UTF-8 name, a u8 dtype code (0 f32, 1 f64),
//! a u8 rank, u32 dims and the raw values; finally a u32 length and a UTF-8
//! TOML document describing the run.

use std::collections::HashSet;
use std::path::Path;

use sdl_net::{param_specs, ModelConfig, ParamStore};
use sdl_tensor::{DType, Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{io_err, Result, TrainError};

pub const MAGIC: &[u8; 4] = b"SDLC";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn of<T: Real>(values: &[T]) -> Self {
        match T::DTYPE {
            DType::F32 => TensorData::F32(values.iter().map(|v| v.as_f64() as f32).collect()),
            DType::F64 => TensorData::F64(values.iter().map(|v| v.as_f64()).collect()),
        }
    }

    /// Values in precision `T`; the stored dtype must match.
    fn to_real<T: Real>(&self, name: &str) -> Result<Vec<T>> {
        if self.dtype() != T::DTYPE {
            return Err(TrainError::Format(format!(
                "{name}: stored as {:?}, requested {:?}",
                self.dtype(),
                T::DTYPE
            )));
        }
        Ok(match self {
            TensorData::F32(v) => v.iter().map(|&x| T::of(x as f64)).collect(),
            TensorData::F64(v) => v.iter().map(|&x| T::of(x)).collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl NamedTensor {
    pub fn from_tensor<T: Real>(name: &str, t: &Tensor<T>) -> Self {
        Self {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data: TensorData::of(t.data()),
        }
    }

    pub fn f64(name: &str, shape: &[usize], values: Vec<f64>) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: TensorData::F64(values),
        }
    }
}

/// Tensors plus a TOML text blob, kept verbatim so that a load/save cycle
/// reproduces the file byte for byte.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
    pub meta: String,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()) {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(TrainError::Format(format!(
                "checkpoint truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            let name = t.name.as_bytes();
            if name.len() > u16::MAX as usize || t.shape.len() > u8::MAX as usize {
                return Err(TrainError::Format(format!("{}: name or rank too large", t.name)));
            }
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(TrainError::Format(format!(
                    "{}: shape {:?} holds {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name);
            out.push(t.data.dtype().code());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match &t.data {
                TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            }
        }
        out.extend_from_slice(&(self.meta.len() as u32).to_le_bytes());
        out.extend_from_slice(self.meta.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(TrainError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(TrainError::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = r.u32("tensor count")?;
        let mut tensors = Vec::new();
        let mut seen = HashSet::new();
        for _ in 0..count {
            let len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(len, "name")?)
                .map_err(|_| TrainError::Format("tensor name is not UTF-8".into()))?
                .to_string();
            if !seen.insert(name.clone()) {
                return Err(TrainError::Format(format!("tensor {name} stored twice")));
            }
            let code = r.u8("dtype")?;
            let dtype = DType::from_code(code).ok_or_else(|| TrainError::Format(format!("{name}: unknown dtype code {code}")))?;
            let ndim = r.u8("rank")? as usize;
            let shape = (0..ndim).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| TrainError::Format(format!("{name}: shape overflows")))?;
            let raw = r.take(n.saturating_mul(dtype.size_of()), "tensor data")?;
            let data = match dtype {
                DType::F32 => TensorData::F32(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
                DType::F64 => TensorData::F64(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
            };
            tensors.push(NamedTensor { name, shape, data });
        }
        let len = r.u32("metadata length")? as usize;
        let meta = std::str::from_utf8(r.take(len, "metadata")?)
            .map_err(|_| TrainError::Format("metadata is not UTF-8".into()))?
            .to_string();
        if r.pos != bytes.len() {
            return Err(TrainError::Format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { tensors, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }

    /// Common dtype of every tensor, if there is one.
    pub fn dtype(&self) -> Option<DType> {
        let first = self.tensors.first()?.data.dtype();
        self.tensors.iter().all(|t| t.data.dtype() == first).then_some(first)
    }

    /// Rebuilds the parameters of `cfg` from the tensors named
    /// `<prefix><param name>`. Missing, unexpected or misshapen entries
    /// among those with the prefix are errors.
    pub fn params<T: Real>(&self, cfg: &ModelConfig, prefix: &str) -> Result<ParamStore<T>> {
        let specs = param_specs(cfg);
        let expected: HashSet<String> = specs.iter().map(|s| format!("{prefix}{}", s.name)).collect();
        if let Some(t) = self
            .tensors
            .iter()
            .find(|t| t.name.starts_with(prefix) && !expected.contains(&t.name))
        {
            return Err(TrainError::Format(format!("unknown tensor {} in checkpoint", t.name)));
        }
        let mut store = ParamStore::new();
        for spec in specs {
            let name = format!("{prefix}{}", spec.name);
            let t = self
                .get(&name)
                .ok_or_else(|| TrainError::Format(format!("tensor {name} missing from checkpoint")))?;
            if t.shape != spec.shape {
                return Err(TrainError::Format(format!(
                    "{name}: shape {:?}, model expects {:?}",
                    t.shape, spec.shape
                )));
            }
            store.insert(&spec.name, Tensor::from_vec(&t.shape, t.data.to_real(&name)?)?)?;
        }
        Ok(store)
    }
}

pub(crate) fn push_params<T: Real>(out: &mut Vec<NamedTensor>, prefix: &str, store: &ParamStore<T>) {
    out.extend(store.iter().map(|(n, t)| NamedTensor::from_tensor(&format!("{prefix}{n}"), t)));
}

/// Summary of a finished or interrupted run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSnapshot {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub final_val_loss: f64,
    pub final_train_loss: f64,
}

/// Metadata of a model checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMeta {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub metrics: MetricsSnapshot,
}

impl ModelMeta {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| TrainError::Format(format!("metadata: {e}")))
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| TrainError::Format(format!("checkpoint metadata: {e}")))
    }
}

/// A model checkpoint for `params`.
pub fn model_checkpoint<T: Real>(params: &ParamStore<T>, meta: &ModelMeta) -> Result<Checkpoint> {
    let mut tensors = Vec::new();
    push_params(&mut tensors, "", params);
    Ok(Checkpoint {
        tensors,
        meta: meta.to_toml()?,
    })
}

/// Parameters and metadata of a model checkpoint. The tensor names must be
/// exactly those of the embedded architecture.
pub fn load_model<T: Real>(ckpt: &Checkpoint) -> Result<(ModelMeta, ParamStore<T>)> {
    let meta = ModelMeta::from_toml(&ckpt.meta)?;
    meta.model.validate()?;
    let params = ckpt.params(&meta.model, "")?;
    Ok((meta, params))
}
