//! Training objectives, the optimizer, the epoch loop, checkpoints and
//! evaluation.

mod checkpoint;
mod config;
mod data;
mod error;
mod eval;
mod loss;
mod optim;
mod trainer;

pub use checkpoint::{load_model, model_checkpoint, Checkpoint, MetricsSnapshot, ModelMeta, NamedTensor, TensorData};
pub use config::{lr_at, Mode, TrainConfig};
pub use data::{acquisition_mask, read_manifest, write_manifest, Dataset, ManifestRow, Prepared, Slice, Split, MANIFEST};
pub use error::{Result, TrainError};
pub use eval::{eval_csv, evaluate, mean_of, write_eval, EvalRow, MEAN, MODEL, ZF};
pub use loss::{ssl_loss, supervised_loss};
pub use optim::{adam_step, OptimState};
pub use trainer::{log_csv, train, write_log, LogRow, Trainer};
