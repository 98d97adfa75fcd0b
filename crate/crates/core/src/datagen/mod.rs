//! Synthetic training data: parametric part templates with known
//! hierarchies, structure-aware deformation, orthographic mask rendering and
//! dataset persistence.

mod dataset;
mod deform;
mod random;
mod render;
mod templates;

use std::path::PathBuf;

use thiserror::Error;

use crate::structure::StructureError;

pub use dataset::{
    build_dataset, manifest_text, mirror_for_view, mix_seed, parse_manifest, select_views, Dataset, DatasetConfig,
    ManifestEntry, Sample, Split, AZIMUTH_STEPS, DEFAULT_ELEVATIONS, MANIFEST_COLUMNS, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use deform::{deform, SNAP_TOLERANCE};
pub use random::random_structure;
pub use render::{convex_hull, in_convex, pixel_center, render_boxes, render_mask, View, RENDER_HALF_EXTENT};
pub use templates::{sample_template, Category, LegLayout, Ranges, TemplateSpec};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Sample { path: PathBuf, message: String },
    #[error(transparent)]
    Structure(#[from] StructureError),
}
