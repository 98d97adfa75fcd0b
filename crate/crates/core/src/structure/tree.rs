use crate::geometry::{
    expand_symmetry, GeometryError, GroupMember, NormalizeTransform, OrientedBox, SymmetryGroup,
    SymmetryParams, Vec3,
};

use super::StructureError;

pub const DEFAULT_MAX_DEPTH: usize = 20;
pub const DEFAULT_MAX_BOXES: usize = 1 << 16;

/// Node type, in the order used by the node classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Adjacency,
    Symmetry,
    Leaf,
}

impl NodeKind {
    pub const ALL: [NodeKind; 3] = [NodeKind::Adjacency, NodeKind::Symmetry, NodeKind::Leaf];

    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Adjacency => "adjacency",
            NodeKind::Symmetry => "symmetry",
            NodeKind::Leaf => "leaf",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// One node of a symmetry hierarchy. Adjacency nodes must have exactly two
/// children and symmetry nodes exactly one (the generator subtree); this is
/// checked by [`validate`] rather than the type so that malformed input can
/// be reported instead of rejected wholesale.
#[derive(Clone, Debug, PartialEq)]
pub enum StructureNode {
    Leaf(OrientedBox),
    Adjacency(Vec<StructureNode>),
    Symmetry { params: SymmetryParams, children: Vec<StructureNode> },
}

impl StructureNode {
    pub fn adjacency(a: StructureNode, b: StructureNode) -> Self {
        StructureNode::Adjacency(vec![a, b])
    }

    pub fn symmetry(generator: StructureNode, params: SymmetryParams) -> Self {
        StructureNode::Symmetry { params, children: vec![generator] }
    }

    pub fn kind(&self) -> NodeKind {
        match self {
            StructureNode::Leaf(_) => NodeKind::Leaf,
            StructureNode::Adjacency(_) => NodeKind::Adjacency,
            StructureNode::Symmetry { .. } => NodeKind::Symmetry,
        }
    }

    pub fn children(&self) -> &[StructureNode] {
        match self {
            StructureNode::Leaf(_) => &[],
            StructureNode::Adjacency(c) => c,
            StructureNode::Symmetry { children, .. } => children,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Longest root-to-leaf edge count; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        self.children().iter().map(|c| 1 + c.depth()).max().unwrap_or(0)
    }

    /// Number of boxes [`flatten`] produces, saturating on overflow.
    pub fn box_count(&self) -> usize {
        match self {
            StructureNode::Leaf(_) => 1,
            StructureNode::Adjacency(c) => c.iter().fold(0usize, |acc, n| acc.saturating_add(n.box_count())),
            StructureNode::Symmetry { params, children } => children
                .iter()
                .fold(0usize, |acc, n| acc.saturating_add(n.box_count()))
                .saturating_mul(params.multiplier()),
        }
    }

    /// Leaf boxes in depth-first order, without symmetry expansion.
    pub fn leaves(&self) -> Vec<OrientedBox> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |b| out.push(*b));
        out
    }

    fn visit_leaves(&self, f: &mut impl FnMut(&OrientedBox)) {
        match self {
            StructureNode::Leaf(b) => f(b),
            _ => self.children().iter().for_each(|c| c.visit_leaves(f)),
        }
    }

    /// Same topology with every leaf box and every symmetry group replaced.
    pub fn map_geometry(
        &self,
        leaf: &mut impl FnMut(&OrientedBox) -> OrientedBox,
        sym: &mut impl FnMut(&SymmetryParams) -> SymmetryParams,
    ) -> StructureNode {
        match self {
            StructureNode::Leaf(b) => StructureNode::Leaf(leaf(b)),
            StructureNode::Adjacency(c) => {
                StructureNode::Adjacency(c.iter().map(|n| n.map_geometry(leaf, sym)).collect())
            }
            StructureNode::Symmetry { params, children } => StructureNode::Symmetry {
                params: sym(params),
                children: children.iter().map(|n| n.map_geometry(leaf, sym)).collect(),
            },
        }
    }

    /// Moves the whole subtree by `map` (a similarity), keeping groups consistent.
    pub fn transformed(&self, map: &crate::geometry::AffineMap) -> StructureNode {
        self.map_geometry(&mut |b| b.transformed(map), &mut |s| s.mapped(map))
    }

    pub fn same_topology(&self, other: &StructureNode) -> bool {
        self.kind() == other.kind()
            && self.children().len() == other.children().len()
            && self.children().iter().zip(other.children()).all(|(a, b)| a.same_topology(b))
    }
}

/// A hierarchy plus bookkeeping metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureTree {
    pub root: StructureNode,
    pub category: String,
    pub provenance: String,
}

impl StructureTree {
    pub fn new(root: StructureNode, category: impl Into<String>, provenance: impl Into<String>) -> Self {
        Self { root, category: category.into(), provenance: provenance.into() }
    }

    pub fn flatten(&self) -> Result<Vec<OrientedBox>, StructureError> {
        flatten(self)
    }

    /// Rescales the tree so its flattened boxes fit the unit cube, and puts
    /// every symmetry group in canonical form.
    pub fn normalized(&self) -> Result<(StructureTree, NormalizeTransform), StructureError> {
        let boxes = self.flatten()?;
        let (_, t) = crate::geometry::normalize_shape(&boxes)?;
        let root = self.root.map_geometry(&mut |b| t.apply_box(b), &mut |s| s.normalized_by(&t));
        let tree = StructureTree { root: canonicalize(&root), ..self.clone() };
        Ok((tree, t))
    }
}

/// Canonical anchors/directions for every symmetry node; the expanded
/// geometry does not change.
pub fn canonicalize(node: &StructureNode) -> StructureNode {
    match node {
        StructureNode::Leaf(b) => StructureNode::Leaf(*b),
        StructureNode::Adjacency(c) => StructureNode::Adjacency(c.iter().map(canonicalize).collect()),
        StructureNode::Symmetry { params, children } => {
            let start = children
                .first()
                .and_then(|c| c.leaves().first().map(|b| b.center()))
                .unwrap_or_else(Vec3::zeros);
            StructureNode::Symmetry {
                params: params.canonical(start),
                children: children.iter().map(canonicalize).collect(),
            }
        }
    }
}

/// Flattened boxes together with the symmetry groups relating them.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatStructure {
    pub boxes: Vec<OrientedBox>,
    pub groups: Vec<SymmetryGroup>,
}

/// Expands every symmetry node. Output order is depth-first: a leaf emits its
/// box, an adjacency node concatenates its children, a symmetry node emits
/// the group expansion of each box of its generator subtree in turn. Nested
/// groups are applied innermost first.
pub fn flatten(tree: &StructureTree) -> Result<Vec<OrientedBox>, StructureError> {
    let mut out = Vec::new();
    flatten_node(&tree.root, &mut out)?;
    Ok(out)
}

fn flatten_node(node: &StructureNode, out: &mut Vec<OrientedBox>) -> Result<(), StructureError> {
    match node {
        StructureNode::Leaf(b) => out.push(*b),
        StructureNode::Adjacency(children) => {
            check_arity(node, children.len(), 2)?;
            for c in children {
                flatten_node(c, out)?;
            }
        }
        StructureNode::Symmetry { params, children } => {
            check_arity(node, children.len(), 1)?;
            let mut inner = Vec::new();
            flatten_node(&children[0], &mut inner)?;
            for b in &inner {
                out.extend(expand_symmetry(b, params)?);
            }
        }
    }
    Ok(())
}

/// Like [`flatten`], stopping once `cap` boxes have been produced. Returns
/// the (possibly truncated) boxes and whether truncation happened.
pub fn flatten_capped(tree: &StructureTree, cap: usize) -> Result<(Vec<OrientedBox>, bool), StructureError> {
    if tree.root.box_count() <= cap {
        return Ok((flatten(tree)?, false));
    }
    let mut out = Vec::new();
    flatten_capped_node(&tree.root, cap, &mut out)?;
    Ok((out, true))
}

fn flatten_capped_node(node: &StructureNode, cap: usize, out: &mut Vec<OrientedBox>) -> Result<(), StructureError> {
    if out.len() >= cap {
        return Ok(());
    }
    match node {
        StructureNode::Leaf(b) => out.push(*b),
        StructureNode::Adjacency(children) => {
            check_arity(node, children.len(), 2)?;
            for c in children {
                flatten_capped_node(c, cap, out)?;
            }
        }
        StructureNode::Symmetry { params, children } => {
            check_arity(node, children.len(), 1)?;
            let mut inner = Vec::new();
            flatten_capped_node(&children[0], cap, &mut inner)?;
            let maps = params.transforms()?;
            'outer: for b in &inner {
                for m in &maps {
                    if out.len() >= cap {
                        break 'outer;
                    }
                    out.push(b.transformed(m));
                }
            }
        }
    }
    Ok(())
}

fn check_arity(node: &StructureNode, found: usize, expected: usize) -> Result<(), StructureError> {
    if found == expected {
        Ok(())
    } else {
        Err(StructureError::Arity { kind: node.kind(), expected, found })
    }
}

/// Flattens and records, for every symmetry node, which output boxes belong
/// to which group member and the map carrying the generator onto them.
pub fn flatten_with_groups(tree: &StructureTree) -> Result<FlatStructure, StructureError> {
    let (boxes, groups) = flatten_groups_node(&tree.root)?;
    Ok(FlatStructure { boxes, groups })
}

type Flat = (Vec<OrientedBox>, Vec<SymmetryGroup>);

fn flatten_groups_node(node: &StructureNode) -> Result<Flat, StructureError> {
    match node {
        StructureNode::Leaf(b) => Ok((vec![*b], Vec::new())),
        StructureNode::Adjacency(children) => {
            check_arity(node, children.len(), 2)?;
            let mut boxes = Vec::new();
            let mut groups = Vec::new();
            for c in children {
                let (b, g) = flatten_groups_node(c)?;
                let offset = boxes.len();
                boxes.extend(b);
                groups.extend(g.into_iter().map(|g| remap_group(g, |i| i + offset, None)));
            }
            Ok((boxes, groups))
        }
        StructureNode::Symmetry { params, children } => {
            check_arity(node, children.len(), 1)?;
            let (inner_boxes, inner_groups) = flatten_groups_node(&children[0])?;
            let maps = params.transforms()?;
            let k = maps.len();
            let n = inner_boxes.len();
            // box-major order: output index of (inner box r, member i) is r*k + i
            let mut boxes = Vec::with_capacity(n * k);
            for b in &inner_boxes {
                boxes.extend(maps.iter().map(|m| b.transformed(m)));
            }
            let mut groups = Vec::new();
            for (i, m) in maps.iter().enumerate() {
                for g in &inner_groups {
                    groups.push(remap_group(g.clone(), |r| r * k + i, Some(m)));
                }
            }
            groups.push(SymmetryGroup {
                members: maps
                    .iter()
                    .enumerate()
                    .map(|(i, m)| GroupMember { transform: *m, boxes: (0..n).map(|r| r * k + i).collect() })
                    .collect(),
            });
            Ok((boxes, groups))
        }
    }
}

fn remap_group(
    g: SymmetryGroup,
    index: impl Fn(usize) -> usize,
    outer: Option<&crate::geometry::AffineMap>,
) -> SymmetryGroup {
    SymmetryGroup {
        members: g
            .members
            .into_iter()
            .map(|m| GroupMember {
                transform: outer.map_or(m.transform, |o| o.compose(&m.transform)),
                boxes: m.boxes.into_iter().map(&index).collect(),
            })
            .collect(),
    }
}

/// Limits enforced by [`validate_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub max_depth: usize,
    pub max_boxes: usize,
    /// Require every flattened corner inside the unit cube (± `bounds_tolerance`).
    pub check_bounds: bool,
    pub bounds_tolerance: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_depth: DEFAULT_MAX_DEPTH, max_boxes: DEFAULT_MAX_BOXES, check_bounds: true, bounds_tolerance: 1e-6 }
    }
}

impl Limits {
    /// Structural rules only; used for decoded trees, which live in the unit
    /// frame but are not re-normalized.
    pub fn structural() -> Self {
        Self { check_bounds: false, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    Arity { kind: NodeKind, expected: usize, found: usize },
    Depth { max: usize },
    Symmetry(String),
    TooManyBoxes { count: usize, max: usize },
    OutOfBounds { excess: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Child indices from the root, e.g. `root/1/0`.
    pub path: String,
    pub rule: Rule,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.rule {
            Rule::Arity { kind, expected, found } => {
                write!(f, "{}: {} node has {found} children, expected {expected}", self.path, kind.name())
            }
            Rule::Depth { max } => write!(f, "{}: deeper than the maximum depth {max}", self.path),
            Rule::Symmetry(m) => write!(f, "{}: {m}", self.path),
            Rule::TooManyBoxes { count, max } => {
                write!(f, "{}: flattens to {count} boxes, limit {max}", self.path)
            }
            Rule::OutOfBounds { excess } => {
                write!(f, "{}: boxes leave the unit cube by {excess:.3e}", self.path)
            }
        }
    }
}

pub fn validate(tree: &StructureTree) -> Vec<Violation> {
    validate_with(tree, &Limits::default())
}

/// All rule violations; empty iff the tree is valid under `limits`.
pub fn validate_with(tree: &StructureTree, limits: &Limits) -> Vec<Violation> {
    let mut out = Vec::new();
    walk(&tree.root, "root".to_string(), 0, limits, &mut out);
    if !out.is_empty() {
        return out;
    }
    let count = tree.root.box_count();
    if count > limits.max_boxes {
        out.push(Violation { path: "root".into(), rule: Rule::TooManyBoxes { count, max: limits.max_boxes } });
        return out;
    }
    if limits.check_bounds {
        if let Ok(boxes) = tree.flatten() {
            let excess = boxes
                .iter()
                .flat_map(|b| b.corners())
                .flat_map(|c| [c.x, c.y, c.z])
                .map(|v| v.abs() - 0.5)
                .fold(0.0, f64::max);
            if excess > limits.bounds_tolerance {
                out.push(Violation { path: "root".into(), rule: Rule::OutOfBounds { excess } });
            }
        }
    }
    out
}

fn walk(node: &StructureNode, path: String, depth: usize, limits: &Limits, out: &mut Vec<Violation>) {
    if depth > limits.max_depth {
        if !out.iter().any(|v| matches!(v.rule, Rule::Depth { .. })) {
            out.push(Violation { path, rule: Rule::Depth { max: limits.max_depth } });
        }
        return;
    }
    let expected = match node {
        StructureNode::Leaf(_) => 0,
        StructureNode::Adjacency(_) => 2,
        StructureNode::Symmetry { params, .. } => {
            if let Err(GeometryError::InvalidSymmetry(m)) = params.validate() {
                out.push(Violation { path: path.clone(), rule: Rule::Symmetry(m) });
            }
            1
        }
    };
    let found = node.children().len();
    if found != expected {
        out.push(Violation { path: path.clone(), rule: Rule::Arity { kind: node.kind(), expected, found } });
    }
    for (i, c) in node.children().iter().enumerate() {
        walk(c, format!("{path}/{i}"), depth + 1, limits, out);
    }
}
