//! Recursive structure decoder and its mirror encoder.
//!
//! A node code is an 80-vector. Three decoders unfold it: adjacency splits a
//! parent into two child codes, symmetry yields a generator code plus 8 raw
//! symmetry parameters, box maps a leaf code to 12 raw box parameters. A
//! 3-way classifier picks which decoder applies. Each map is a small MLP
//! (`n → 200 → out`, tanh); the classifier's output layer is linear.

mod autoenc;
mod decoder;
mod mlp;

use thiserror::Error;

use crate::nn::NnError;
use crate::structure::StructureError;

pub use autoenc::{infer_hierarchy, StructureEncoder, SymmetryCandidate};
pub use decoder::{check_target, classify_node, decode_structure, teacher_forced_loss, Decoders, LossBreakdown};

pub const CODE_DIM: usize = 80;
pub const HIDDEN_DIM: usize = 200;
pub const NUM_CLASSES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub box_se: f64,
    pub sym_se: f64,
    pub ce: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { box_se: 1.0, sym_se: 1.0, ce: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RvnnConfig {
    pub code_dim: usize,
    pub hidden: usize,
    /// `false` collapses every map to a single affine layer.
    pub two_layer: bool,
    pub max_depth: usize,
    /// Upper bound on the flattened size of decoded trees.
    pub max_boxes: usize,
    pub weights: LossWeights,
}

impl Default for RvnnConfig {
    fn default() -> Self {
        Self {
            code_dim: CODE_DIM,
            hidden: HIDDEN_DIM,
            two_layer: true,
            max_depth: crate::structure::DEFAULT_MAX_DEPTH,
            max_boxes: crate::structure::DEFAULT_MAX_BOXES,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RvnnError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("code has length {found}, expected {expected}")]
    CodeLength { expected: usize, found: usize },
    #[error("code has non-finite entries")]
    NonFiniteCode,
    #[error("invalid target: {}", .0.join("; "))]
    InvalidTarget(Vec<String>),
    #[error("no boxes to group")]
    NoBoxes,
    #[error("bad symmetry candidate: {0}")]
    BadCandidate(String),
}
