//! Symmetry hierarchies: leaves hold boxes, adjacency nodes join two parts,
//! symmetry nodes replicate a generator subtree. Flattening expands the
//! groups into a concrete box list.
//!
//! Depth and flattened-size limits are local safety bounds, defaulting to
//! depth 20 and 65,536 boxes.

mod format;
mod tree;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use format::{deserialize, parse, serialize, FORMAT_HEADER, FORMAT_VERSION};
pub use tree::{
    canonicalize, flatten, flatten_capped, flatten_with_groups, validate, validate_with, FlatStructure, Limits,
    NodeKind, Rule, StructureNode, StructureTree, Violation, DEFAULT_MAX_BOXES, DEFAULT_MAX_DEPTH,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("{} node has {found} children, expected {expected}", kind.name())]
    Arity { kind: NodeKind, expected: usize, found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid structure: {}", .0.join("; "))]
    Validation(Vec<String>),
}
