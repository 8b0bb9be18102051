use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use sdl_mri::seed::{derive_seed, rng_for, TAG_SHUFFLE, TAG_SPLIT, TAG_VAL_SPLIT};
use sdl_mri::{mask_kspace, split_mask_retry, SplitMasks};
use sdl_net::{init_params, sdlformer_forward, ModelConfig, ParamStore};
use sdl_tensor::{no_grad, Real, Tensor};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{model_checkpoint, push_params, Checkpoint, MetricsSnapshot, ModelMeta, NamedTensor};
use crate::config::{lr_at, Mode, TrainConfig};
use crate::data::{Dataset, Prepared, Split};
use crate::error::{io_err, Result, TrainError};
use crate::loss::{ssl_loss, supervised_loss};
use crate::optim::{adam_step, OptimState};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub lr: f64,
}

pub fn log_csv(rows: &[LogRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| TrainError::Format(e.to_string()))
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<()> {
    std::fs::write(path, log_csv(rows)?).map_err(io_err(path))
}

/// Metadata of a resumable training state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateMeta {
    model: ModelConfig,
    train: TrainConfig,
    next_epoch: usize,
    adam_step: u64,
    best_epoch: usize,
    best_val_loss: f64,
    log: Vec<LogRow>,
}

struct ValItem<T: Real> {
    slice: Prepared<T>,
    split: SplitMasks,
}

/// Deterministic epoch-by-epoch trainer whose complete state can be saved
/// and restored between epochs.
pub struct Trainer<T: Real> {
    model: ModelConfig,
    cfg: TrainConfig,
    train: Vec<Prepared<T>>,
    val: Vec<ValItem<T>>,
    params: ParamStore<T>,
    opt: OptimState,
    next_epoch: usize,
    best: ParamStore<T>,
    best_epoch: usize,
    best_val: f64,
    log: Vec<LogRow>,
}

fn first_non_finite<'a, T: Real>(named: impl IntoIterator<Item = (&'a str, &'a Tensor<T>)>) -> Option<String> {
    named.into_iter().find(|(_, t)| !t.all_finite()).map(|(n, _)| n.to_string())
}

impl<T: Real> Trainer<T> {
    pub fn new(data: &Dataset, model: ModelConfig, cfg: TrainConfig) -> Result<Self> {
        let params = init_params(&model, cfg.seed)?;
        let opt = OptimState::new(&params);
        Self::assemble(data, model, cfg, params, opt)
    }

    fn assemble(data: &Dataset, model: ModelConfig, cfg: TrainConfig, params: ParamStore<T>, opt: OptimState) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        if data.n_coils() != model.n_coils {
            return Err(TrainError::Config(format!(
                "model expects {} coils, dataset has {}",
                model.n_coils,
                data.n_coils()
            )));
        }
        let prep = |split| {
            data.of_split(split)
                .map(|s| Prepared::<T>::new(s, cfg.accel))
                .collect::<Result<Vec<_>>>()
        };
        let train = prep(Split::Train)?;
        let val_slices = prep(Split::Val)?;
        if train.is_empty() || val_slices.is_empty() {
            return Err(TrainError::Config(format!(
                "need training and validation slices, have {} and {}",
                train.len(),
                val_slices.len()
            )));
        }
        let val = val_slices
            .into_iter()
            .enumerate()
            .map(|(i, slice)| {
                let split = split_mask_retry(&slice.mask, cfg.rho, derive_seed(cfg.seed, &[TAG_VAL_SPLIT, i as u64]))?;
                Ok(ValItem { slice, split })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            best: params.clone(),
            model,
            cfg,
            train,
            val,
            params,
            opt,
            next_epoch: 0,
            best_epoch: 0,
            best_val: f64::INFINITY,
            log: Vec::new(),
        })
    }

    /// Restores a state written by [`Trainer::state_checkpoint`].
    pub fn resume(data: &Dataset, state: &Checkpoint) -> Result<Self> {
        let meta: StateMeta = toml::from_str(&state.meta).map_err(|e| TrainError::Format(format!("training state metadata: {e}")))?;
        let params = state.params::<T>(&meta.model, "param.")?;
        let best = state.params::<T>(&meta.model, "best.")?;
        let known: HashSet<String> = params
            .names()
            .iter()
            .flat_map(|n| ["param.", "best.", "adam.m.", "adam.v."].map(|p| format!("{p}{n}")))
            .collect();
        if let Some(t) = state.tensors.iter().find(|t| !known.contains(&t.name)) {
            return Err(TrainError::Format(format!("unknown tensor {} in training state", t.name)));
        }
        let mut opt = OptimState::new(&params);
        opt.step = meta.adam_step;
        for (i, (name, p)) in params.iter().enumerate() {
            for (prefix, dst) in [("adam.m.", &mut opt.m[i]), ("adam.v.", &mut opt.v[i])] {
                let key = format!("{prefix}{name}");
                let t = state
                    .get(&key)
                    .ok_or_else(|| TrainError::Format(format!("tensor {key} missing from training state")))?;
                match &t.data {
                    crate::checkpoint::TensorData::F64(v) if t.shape == p.shape() => *dst = v.clone(),
                    _ => return Err(TrainError::Format(format!("{key}: expected f64 {:?}", p.shape()))),
                }
            }
        }
        let mut tr = Self::assemble(data, meta.model, meta.train, params, opt)?;
        tr.best = best;
        tr.next_epoch = meta.next_epoch;
        tr.best_epoch = meta.best_epoch;
        tr.best_val = meta.best_val_loss;
        tr.log = meta.log;
        Ok(tr)
    }

    /// Changes the total epoch budget, e.g. to extend a resumed run.
    pub fn set_epochs(&mut self, epochs: usize) -> Result<()> {
        if epochs < self.next_epoch.max(1) {
            return Err(TrainError::Config(format!(
                "cannot set {epochs} epochs, {} already run",
                self.next_epoch
            )));
        }
        self.cfg.epochs = epochs;
        Ok(())
    }

    pub fn finished(&self) -> bool {
        self.next_epoch >= self.cfg.epochs
    }

    fn nan(&self, epoch: usize, slice: &str, tensor: String) -> TrainError {
        TrainError::NonFinite {
            epoch,
            slice: slice.to_string(),
            tensor,
        }
    }

    fn step(&mut self, epoch: usize, idx: usize, lr: f64) -> Result<f64> {
        let slice = &self.train[idx];
        let (input, mask, split) = match self.cfg.mode {
            Mode::Ssl => {
                let seed = derive_seed(self.cfg.seed, &[TAG_SPLIT, epoch as u64, idx as u64]);
                let split = split_mask_retry(&slice.mask, self.cfg.rho, seed)?;
                (mask_kspace(&slice.y, &split.m1)?, split.m1.clone(), Some(split))
            }
            Mode::Supervised => (slice.y.clone(), slice.mask.clone(), None),
        };
        let rec = sdlformer_forward(&input, &slice.maps, &mask, &self.model, &self.params)?;
        let loss = match &split {
            Some(sp) => ssl_loss(&rec.image, &slice.maps, &sp.m2, &mask_kspace(&slice.y, &sp.m2)?)?,
            None => supervised_loss(&rec.image, &slice.reference)?,
        };
        if !loss.all_finite() {
            let culprit = first_non_finite(
                [("input k-space", input.tensor())]
                    .into_iter()
                    .chain(self.params.iter())
                    .chain([("pre-consistency image", rec.pre_dc.tensor()), ("output image", rec.image.tensor())]),
            )
            .unwrap_or_else(|| "loss".into());
            return Err(self.nan(epoch, &slice.id, culprit));
        }
        loss.backward()?;
        for (name, p) in self.params.iter() {
            if let Some(g) = p.grad() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(self.nan(epoch, &slice.id, format!("gradient of {name}")));
                }
            }
        }
        adam_step(&mut self.params, &mut self.opt, lr)?;
        Ok(loss.item().as_f64())
    }

    /// Mean loss over the validation slices with their fixed splits.
    pub fn validation_loss(&self, params: &ParamStore<T>) -> Result<f64> {
        no_grad(|| {
            let mut total = 0.0;
            for item in &self.val {
                let s = &item.slice;
                let loss = match self.cfg.mode {
                    Mode::Ssl => {
                        let y1 = mask_kspace(&s.y, &item.split.m1)?;
                        let rec = sdlformer_forward(&y1, &s.maps, &item.split.m1, &self.model, params)?;
                        ssl_loss(&rec.image, &s.maps, &item.split.m2, &mask_kspace(&s.y, &item.split.m2)?)?
                    }
                    Mode::Supervised => {
                        let rec = sdlformer_forward(&s.y, &s.maps, &s.mask, &self.model, params)?;
                        supervised_loss(&rec.image, &s.reference)?
                    }
                };
                total += loss.item().as_f64();
            }
            Ok(total / self.val.len() as f64)
        })
    }

    /// Trains one epoch over a seeded shuffle of the training slices, then
    /// validates and updates the best parameters.
    pub fn run_epoch(&mut self) -> Result<()> {
        let epoch = self.next_epoch;
        let lr = lr_at(epoch, &self.cfg);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut rng_for(self.cfg.seed, &[TAG_SHUFFLE, epoch as u64]));
        let mut total = 0.0;
        for idx in order {
            total += self.step(epoch, idx, lr)?;
        }
        let train_loss = total / self.train.len() as f64;
        let val_loss = self.validation_loss(&self.params)?;
        if !val_loss.is_finite() {
            return Err(self.nan(epoch, "validation", "validation loss".into()));
        }
        self.log.push(LogRow {
            epoch,
            split: Split::Train,
            loss: train_loss,
            lr,
        });
        self.log.push(LogRow {
            epoch,
            split: Split::Val,
            loss: val_loss,
            lr,
        });
        if val_loss < self.best_val {
            self.best_val = val_loss;
            self.best_epoch = epoch;
            self.best = self.params.clone();
        }
        self.next_epoch += 1;
        Ok(())
    }

    /// Runs the remaining epochs, calling `after_epoch` after each.
    pub fn run(&mut self, mut after_epoch: impl FnMut(&Self) -> Result<()>) -> Result<()> {
        while !self.finished() {
            self.run_epoch()?;
            after_epoch(self)?;
        }
        Ok(())
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn best_params(&self) -> &ParamStore<T> {
        &self.best
    }

    pub fn best_val_loss(&self) -> f64 {
        self.best_val
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epochs_run(&self) -> usize {
        self.next_epoch
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn last_loss(&self, split: Split) -> f64 {
        self.log.iter().rev().find(|r| r.split == split).map_or(f64::NAN, |r| r.loss)
    }

    pub fn final_val_loss(&self) -> f64 {
        self.last_loss(Split::Val)
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        MetricsSnapshot {
            epochs_run: self.next_epoch,
            best_epoch: self.best_epoch,
            best_val_loss: self.best_val,
            final_val_loss: self.final_val_loss(),
            final_train_loss: self.last_loss(Split::Train),
        }
    }

    /// Checkpoint of the parameters with the lowest validation loss.
    pub fn best_checkpoint(&self) -> Result<Checkpoint> {
        model_checkpoint(
            &self.best,
            &ModelMeta {
                model: self.model.clone(),
                train: self.cfg.clone(),
                metrics: self.snapshot(),
            },
        )
    }

    /// Everything needed to continue bit-exactly from the next epoch.
    pub fn state_checkpoint(&self) -> Result<Checkpoint> {
        let mut tensors = Vec::new();
        push_params(&mut tensors, "param.", &self.params);
        push_params(&mut tensors, "best.", &self.best);
        for (prefix, moments) in [("adam.m.", &self.opt.m), ("adam.v.", &self.opt.v)] {
            for ((name, p), v) in self.params.iter().zip(moments) {
                tensors.push(NamedTensor::f64(&format!("{prefix}{name}"), p.shape(), v.clone()));
            }
        }
        let meta = StateMeta {
            model: self.model.clone(),
            train: self.cfg.clone(),
            next_epoch: self.next_epoch,
            adam_step: self.opt.step,
            best_epoch: self.best_epoch,
            best_val_loss: self.best_val,
            log: self.log.clone(),
        };
        Ok(Checkpoint {
            tensors,
            meta: toml::to_string(&meta).map_err(|e| TrainError::Format(format!("training state metadata: {e}")))?,
        })
    }
}

/// Trains from scratch and returns the finished trainer.
pub fn train<T: Real>(data: &Dataset, model: &ModelConfig, cfg: &TrainConfig) -> Result<Trainer<T>> {
    let mut tr = Trainer::new(data, model.clone(), cfg.clone())?;
    tr.run(|_| Ok(()))?;
    Ok(tr)
}
