//! Recovery of recursive cuboid structures (parts joined by adjacency and
//! grouped by symmetry) from single object masks.
//!
//! The pipeline: a small convolutional [`encoder`] turns a 56×56 mask into an
//! 80-dimensional root code, the recursive decoder in [`rvnn`] unfolds that
//! code into a [`structure`] tree of oriented boxes, and [`train`] fits both
//! with back-propagation through the tree. [`datagen`] synthesizes the
//! mask/structure pairs and [`geometry`] supplies the box math, evaluation
//! metrics and symmetry-based voxel completion.

pub mod geometry;
pub mod structure;
pub mod nn;
pub mod rvnn;
pub mod encoder;
pub mod datagen;
pub mod train;
pub mod fsutil;
