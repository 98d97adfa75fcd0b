//! The `.struct` text format.
//!
//! ```text
//! im2struct-structure
//! version 1
//! category chair
//! provenance chair-0003
//! node {
//!   kind adjacency
//!   children {
//!     node {
//!       kind leaf
//!       box <12 reals: center, axis1, axis2, dims>
//!     }
//!     node {
//!       kind symmetry
//!       sym <reflective|rotational|translational> <repetitions> <direction: 3 reals> <anchor: 3 reals>
//!       children {
//!         node { ... }
//!       }
//!     }
//!   }
//! }
//! ```
//!
//! Tokens are separated by whitespace; `#` starts a comment. Reals are
//! written in scientific notation with 17 significant digits, which
//! round-trips every `f64`. The writer emits fields in the fixed order
//! `kind`, `box`, `sym`, `children` with two-space indentation, so
//! identical trees always serialize to identical bytes. `category` and
//! `provenance` are single tokens (`-` when empty).

use std::fmt::Write;

use crate::geometry::{OrientedBox, SymmetryKind, SymmetryParams, Vec3, BOX_PARAMS};

use super::tree::{validate, NodeKind, StructureNode, StructureTree};
use super::StructureError;

pub const FORMAT_HEADER: &str = "im2struct-structure";
pub const FORMAT_VERSION: u32 = 1;

fn real(out: &mut String, v: f64) {
    write!(out, " {v:.16e}").unwrap();
}

fn label(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

/// Serializes a tree. Metadata strings must not contain whitespace or `#`.
pub fn serialize(tree: &StructureTree) -> Result<String, StructureError> {
    for (name, v) in [("category", &tree.category), ("provenance", &tree.provenance)] {
        if v.chars().any(|c| c.is_whitespace() || c == '#' || c == '{' || c == '}') {
            return Err(StructureError::Schema(format!("{name} {v:?} must be a single token")));
        }
    }
    let mut out = String::new();
    writeln!(out, "{FORMAT_HEADER}").unwrap();
    writeln!(out, "version {FORMAT_VERSION}").unwrap();
    writeln!(out, "category {}", label(&tree.category)).unwrap();
    writeln!(out, "provenance {}", label(&tree.provenance)).unwrap();
    write_node(&mut out, &tree.root, 0);
    Ok(out)
}

fn write_node(out: &mut String, node: &StructureNode, depth: usize) {
    let pad = "  ".repeat(depth);
    writeln!(out, "{pad}node {{").unwrap();
    writeln!(out, "{pad}  kind {}", node.kind().name()).unwrap();
    match node {
        StructureNode::Leaf(b) => {
            out.push_str(&pad);
            out.push_str("  box");
            for v in b.to_raw_exact() {
                real(out, v);
            }
            out.push('\n');
        }
        StructureNode::Symmetry { params, .. } => {
            write!(out, "{pad}  sym {} {}", params.kind.name(), params.repetitions).unwrap();
            for v in params.direction.iter().chain(params.anchor.iter()) {
                real(out, *v);
            }
            out.push('\n');
        }
        StructureNode::Adjacency(_) => {}
    }
    if !node.children().is_empty() {
        writeln!(out, "{pad}  children {{").unwrap();
        for c in node.children() {
            write_node(out, c, depth + 2);
        }
        writeln!(out, "{pad}  }}").unwrap();
    }
    writeln!(out, "{pad}}}").unwrap();
}

#[derive(Clone, Copy, Debug)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut start = None;
        for (i, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    out.push(Token { text: &line[s..i], line: ln + 1, column: s + 1 });
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
    }
    out
}

struct Parser<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: (usize, usize),
}

impl<'a> Parser<'a> {
    fn error(&self, at: Option<Token<'_>>, message: impl Into<String>) -> StructureError {
        let (line, column) = at.map_or(self.end, |t| (t.line, t.column));
        StructureError::Parse { line, column, message: message.into() }
    }

    fn peek(&self) -> Option<Token<'a>> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, StructureError> {
        let t = self.peek().ok_or_else(|| self.error(None, format!("unexpected end of input, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<Token<'a>, StructureError> {
        let t = self.next(&format!("`{word}`"))?;
        if t.text != word {
            return Err(self.error(Some(t), format!("expected `{word}`, found `{}`", t.text)));
        }
        Ok(t)
    }

    fn real(&mut self) -> Result<f64, StructureError> {
        let t = self.next("a number")?;
        t.text.parse::<f64>().map_err(|_| self.error(Some(t), format!("`{}` is not a number", t.text)))
    }

    fn vec3(&mut self) -> Result<Vec3, StructureError> {
        Ok(Vec3::new(self.real()?, self.real()?, self.real()?))
    }

    fn node(&mut self) -> Result<StructureNode, StructureError> {
        let start = self.expect("node")?;
        self.expect("{")?;
        self.expect("kind")?;
        let kt = self.next("a node kind")?;
        let kind = NodeKind::from_name(kt.text)
            .ok_or_else(|| self.error(Some(kt), format!("unknown node kind `{}`", kt.text)))?;
        let mut bx = None;
        let mut sym = None;
        let mut children = Vec::new();
        loop {
            let t = self.next("`}`")?;
            match t.text {
                "}" => break,
                "box" if bx.is_none() && sym.is_none() && children.is_empty() => {
                    let mut raw = [0.0; BOX_PARAMS];
                    for slot in &mut raw {
                        *slot = self.real()?;
                    }
                    let b = OrientedBox::from_stored(
                        Vec3::new(raw[0], raw[1], raw[2]),
                        Vec3::new(raw[3], raw[4], raw[5]),
                        Vec3::new(raw[6], raw[7], raw[8]),
                        Vec3::new(raw[9], raw[10], raw[11]),
                    )
                    .map_err(|e| self.error(Some(t), e.to_string()))?;
                    bx = Some(b);
                }
                "sym" if bx.is_none() && sym.is_none() && children.is_empty() => {
                    let kt = self.next("a symmetry kind")?;
                    let kind = SymmetryKind::from_name(kt.text)
                        .ok_or_else(|| self.error(Some(kt), format!("unknown symmetry kind `{}`", kt.text)))?;
                    let rt = self.next("repetitions")?;
                    let repetitions = rt
                        .text
                        .parse::<u32>()
                        .map_err(|_| self.error(Some(rt), format!("`{}` is not a repetition count", rt.text)))?;
                    let direction = self.vec3()?;
                    let anchor = self.vec3()?;
                    sym = Some(SymmetryParams { kind, repetitions, direction, anchor });
                }
                "children" if children.is_empty() => {
                    self.expect("{")?;
                    while self.peek().is_some_and(|t| t.text == "node") {
                        children.push(self.node()?);
                    }
                    self.expect("}")?;
                }
                other => return Err(self.error(Some(t), format!("unexpected `{other}` in node"))),
            }
        }
        let schema = |m: String| StructureError::Schema(format!("node at line {}: {m}", start.line));
        match kind {
            NodeKind::Leaf => {
                if sym.is_some() || !children.is_empty() {
                    return Err(schema("leaf nodes carry only a box".into()));
                }
                Ok(StructureNode::Leaf(bx.ok_or_else(|| schema("leaf without box".into()))?))
            }
            NodeKind::Adjacency => {
                if bx.is_some() || sym.is_some() {
                    return Err(schema("adjacency nodes carry only children".into()));
                }
                Ok(StructureNode::Adjacency(children))
            }
            NodeKind::Symmetry => {
                if bx.is_some() {
                    return Err(schema("symmetry nodes carry no box".into()));
                }
                let params = sym.ok_or_else(|| schema("symmetry node without sym".into()))?;
                Ok(StructureNode::Symmetry { params, children })
            }
        }
    }
}

/// Parses and validates a tree (default limits, including the unit-cube
/// bounds check).
pub fn deserialize(text: &str) -> Result<StructureTree, StructureError> {
    let tree = parse(text)?;
    let violations = validate(&tree);
    if !violations.is_empty() {
        return Err(StructureError::Validation(violations.iter().map(|v| v.to_string()).collect()));
    }
    Ok(tree)
}

/// Parses without the validation pass.
pub fn parse(text: &str) -> Result<StructureTree, StructureError> {
    let tokens = tokenize(text);
    let end = (text.lines().count().max(1), 1);
    let mut p = Parser { tokens, pos: 0, end };
    p.expect(FORMAT_HEADER)?;
    p.expect("version")?;
    let vt = p.next("a version number")?;
    if vt.text.parse::<u32>().ok() != Some(FORMAT_VERSION) {
        return Err(p.error(Some(vt), format!("unsupported version `{}`", vt.text)));
    }
    p.expect("category")?;
    let category = p.next("a category")?.text;
    p.expect("provenance")?;
    let provenance = p.next("a provenance id")?.text;
    let root = p.node()?;
    if let Some(t) = p.peek() {
        return Err(p.error(Some(t), format!("trailing `{}` after root node", t.text)));
    }
    let unlabel = |s: &str| if s == "-" { String::new() } else { s.to_string() };
    Ok(StructureTree { root, category: unlabel(category), provenance: unlabel(provenance) })
}

impl OrientedBox {
    /// Center, axis1, axis2 and dims verbatim (no dimension offset), as
    /// stored in `.struct` files.
    pub fn to_raw_exact(&self) -> [f64; BOX_PARAMS] {
        let mut raw = [0.0; BOX_PARAMS];
        raw[0..3].copy_from_slice(self.center().as_slice());
        raw[3..6].copy_from_slice(self.axis1().as_slice());
        raw[6..9].copy_from_slice(self.axis2().as_slice());
        raw[9..12].copy_from_slice(self.dims().as_slice());
        raw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
im2struct-structure
version 1
category demo   # a comment
provenance hand-written
node {
  kind leaf
  box 0.1 -0.2 0.0  1 0 0  0 1 0  0.5 0.25 0.125
}
";

    #[test]
    fn minimal_document() {
        let t = deserialize(MINIMAL).unwrap();
        assert_eq!(t.category, "demo");
        assert_eq!(t.provenance, "hand-written");
        let boxes = t.flatten().unwrap();
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].center(), Vec3::new(0.1, -0.2, 0.0));
        assert_eq!(boxes[0].dims(), Vec3::new(0.5, 0.25, 0.125));
    }

    #[test]
    fn empty_text_is_parse_error() {
        assert!(matches!(deserialize(""), Err(StructureError::Parse { .. })));
    }

    #[test]
    fn reports_line_and_column() {
        let bad = MINIMAL.replace("0.25", "zz");
        match deserialize(&bad) {
            Err(StructureError::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 39);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_and_validation_errors() {
        let bad = MINIMAL.replace("kind leaf", "kind adjacency");
        assert!(matches!(deserialize(&bad), Err(StructureError::Schema(_))));
        let one_child = "im2struct-structure\nversion 1\ncategory - provenance -\nnode { kind adjacency children { node { kind leaf box 0 0 0 1 0 0 0 1 0 .1 .1 .1 } } }";
        assert!(matches!(deserialize(one_child), Err(StructureError::Validation(_))));
        assert!(parse(one_child).is_ok());
        let v2 = MINIMAL.replace("version 1", "version 2");
        assert!(matches!(deserialize(&v2), Err(StructureError::Parse { line: 2, .. })));
    }

    #[test]
    fn round_trip_is_exact() {
        let t = deserialize(MINIMAL).unwrap();
        let text = serialize(&t).unwrap();
        let back = deserialize(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(serialize(&back).unwrap(), text);
    }

    #[test]
    fn awkward_metadata_rejected() {
        let mut t = deserialize(MINIMAL).unwrap();
        t.category = "two words".into();
        assert!(serialize(&t).is_err());
        t.category = String::new();
        let back = deserialize(&serialize(&t).unwrap()).unwrap();
        assert_eq!(back.category, "");
    }
}
