//! Small reverse-mode autodiff engine, parameter storage and SGD.

mod checkpoint;
mod gradcheck;
pub mod ops;
mod params;
mod tape;

pub use checkpoint::{
    checkpoint_bytes, read_checkpoint, read_checkpoint_matching, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use ops::{affine_tanh, softmax_cross_entropy, ConvShape};
pub use params::{group_of, init_params, Gradients, Init, Param, ParamId, ParamSpec, ParamStore};
pub use tape::{Tape, Var};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown parameter {0}")]
    MissingParam(String),
    #[error("duplicate parameter {0}")]
    DuplicateParam(String),
    #[error("no learning rate for parameter group {0}")]
    UnknownGroup(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
