//! Cuboid geometry: oriented boxes, symmetry groups, shape normalization,
//! the corner-based Hausdorff metrics and symmetry-driven voxel completion.

mod metrics;
mod obb;
mod obj;
mod symmetry;
mod voxel;

use thiserror::Error;

pub use metrics::{
    box_hausdorff, pair_hausdorff_error, set_distance, structure_hausdorff_error, thresholded_accuracy,
};
pub use obb::{
    corner_bounds, normalize_shape, orthonormalize, AffineMap, NormalizeTransform, OrientedBox, Vec3,
    BOX_PARAMS, DIM_EPSILON,
};
pub use obj::{boxes_to_obj, BOX_FACES};
pub use symmetry::{
    expand_symmetry, SymmetryKind, SymmetryParams, MAX_REPETITIONS, MIN_REPETITIONS, SYMMETRY_PARAMS,
};
pub use voxel::{refine_volume, GroupMember, SymmetryGroup, VoxelGrid, VOXEL_MAGIC};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid symmetry: {0}")]
    InvalidSymmetry(String),
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("ground-truth box {0} has zero diagonal")]
    DegenerateBox(usize),
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid voxel grid: {0}")]
    InvalidGrid(String),
}
