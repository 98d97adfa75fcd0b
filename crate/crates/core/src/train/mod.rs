//! Training orchestration: a versioned run config, a deterministic
//! mini-batch SGD loop with per-group step decay, loss logging,
//! checkpointing, and evaluation against ground-truth structures.

mod config;
mod eval;
mod fit;
mod model;
mod verify;

use std::path::PathBuf;

use thiserror::Error;

use crate::datagen::DatagenError;
use crate::encoder::EncoderError;
use crate::nn::NnError;
use crate::rvnn::RvnnError;
use crate::structure::StructureError;

pub use config::{Decay, Rates, TrainConfig, CONFIG_VERSION};
pub use eval::{evaluate, EvalReport, EvalRow, Predictor, EVAL_THRESHOLDS};
pub use fit::{
    fit, loss_log_text, train_autoencoder, train_loop, train_samples, AutoencoderConfig, EpochStats, DIVERGENCE_LOSS, Schedule,
    TrainOutcome, LOSS_LOG_COLUMNS,
};
pub use model::Model;
pub use verify::gradient_check_case;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("training diverged at epoch {epoch}: {message}")]
    Divergence { epoch: usize, message: String },
    #[error("sample {sample}: {message}")]
    Sample { sample: String, message: String },
    #[error(transparent)]
    Data(#[from] DatagenError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Rvnn(#[from] RvnnError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}
