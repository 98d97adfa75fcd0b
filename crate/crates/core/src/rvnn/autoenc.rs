use crate::geometry::{OrientedBox, SymmetryParams, BOX_PARAMS, SYMMETRY_PARAMS};
use crate::nn::{ParamSpec, ParamStore, Tape, Var};
use crate::structure::{StructureNode, StructureTree};

use super::decoder::Decoders;
use super::mlp::{mlp_specs, Mlp};
use super::{RvnnConfig, RvnnError};

/// Bottom-up mirror of the decoders: folds a tree into one root code.
#[derive(Clone, Debug)]
pub struct StructureEncoder {
    boxes: Mlp,
    adj: Mlp,
    sym: Mlp,
}

impl StructureEncoder {
    pub fn specs(cfg: &RvnnConfig) -> Vec<ParamSpec> {
        let n = cfg.code_dim;
        let dims = |input: usize| if cfg.two_layer { vec![input, cfg.hidden, n] } else { vec![input, n] };
        [
            mlp_specs("aenc.box", &dims(BOX_PARAMS)),
            mlp_specs("aenc.adj", &dims(2 * n)),
            mlp_specs("aenc.sym", &dims(n + SYMMETRY_PARAMS)),
        ]
        .concat()
    }

    pub fn bind(params: &ParamStore, cfg: &RvnnConfig) -> Result<Self, RvnnError> {
        let layers = if cfg.two_layer { 2 } else { 1 };
        Ok(Self {
            boxes: Mlp::bind(params, "aenc.box", layers, true)?,
            adj: Mlp::bind(params, "aenc.adj", layers, true)?,
            sym: Mlp::bind(params, "aenc.sym", layers, true)?,
        })
    }

    pub fn encode(&self, tape: &mut Tape, node: &StructureNode) -> Result<Var, RvnnError> {
        match node {
            StructureNode::Leaf(b) => {
                let x = tape.input(b.to_raw().to_vec());
                Ok(self.boxes.forward(tape, x)?)
            }
            StructureNode::Adjacency(c) => {
                let a = self.encode(tape, &c[0])?;
                let b = self.encode(tape, &c[1])?;
                let x = tape.concat(&[a, b]);
                Ok(self.adj.forward(tape, x)?)
            }
            StructureNode::Symmetry { params, children } => {
                let g = self.encode(tape, &children[0])?;
                let s = tape.input(params.to_raw().to_vec());
                let x = tape.concat(&[g, s]);
                Ok(self.sym.forward(tape, x)?)
            }
        }
    }

    /// Root code of a valid tree.
    pub fn encode_structure(
        params: &ParamStore,
        cfg: &RvnnConfig,
        tree: &StructureTree,
    ) -> Result<Vec<f64>, RvnnError> {
        super::decoder::check_target(tree, cfg)?;
        let e = Self::bind(params, cfg)?;
        let mut tape = Tape::new(params);
        let v = e.encode(&mut tape, &tree.root)?;
        Ok(tape.value(v).to_vec())
    }
}

/// A group of boxes known to be related by `params`; `members[i]` is the
/// image of `members[0]` under the i-th member transform.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryCandidate {
    pub members: Vec<usize>,
    pub params: SymmetryParams,
}

/// Self-reconstruction loss of a subtree under the autoencoder.
fn score(enc: &StructureEncoder, dec: &Decoders, params: &ParamStore, node: &StructureNode) -> Result<f64, RvnnError> {
    let mut tape = Tape::new(params);
    let code = enc.encode(&mut tape, node)?;
    let (loss, _) = dec.teacher_forced(&mut tape, code, node)?;
    Ok(tape.scalar(loss))
}

/// Greedy bottom-up grouping of a box soup.
///
/// Starting from one leaf per box, each round evaluates every possible merge
/// (an adjacency node over two current roots, or collapsing a symmetry
/// candidate whose members are all still untouched leaves) and keeps the one
/// whose subtree the autoencoder reconstructs best. Ties keep the first merge
/// enumerated: adjacency pairs in index order, then candidates in order.
pub fn infer_hierarchy(
    params: &ParamStore,
    cfg: &RvnnConfig,
    boxes: &[OrientedBox],
    candidates: &[SymmetryCandidate],
) -> Result<StructureTree, RvnnError> {
    if boxes.is_empty() {
        return Err(RvnnError::NoBoxes);
    }
    for c in candidates {
        let k = c.params.multiplier();
        if c.members.len() != k {
            return Err(RvnnError::BadCandidate(format!("{} members for a {k}-fold group", c.members.len())));
        }
        if let Some(&i) = c.members.iter().find(|&&i| i >= boxes.len()) {
            return Err(RvnnError::BadCandidate(format!("box index {i} out of range")));
        }
        let mut m = c.members.clone();
        m.sort_unstable();
        m.dedup();
        if m.len() != c.members.len() {
            return Err(RvnnError::BadCandidate("repeated box index".into()));
        }
        c.params.validate().map_err(|e| RvnnError::BadCandidate(e.to_string()))?;
    }
    let enc = StructureEncoder::bind(params, cfg)?;
    let dec = Decoders::bind(params, cfg)?;

    // roots[i] = (subtree, Some(box) while it is still the untouched leaf of that box)
    let mut roots: Vec<(StructureNode, Option<usize>)> =
        boxes.iter().enumerate().map(|(i, b)| (StructureNode::Leaf(*b), Some(i))).collect();
    while roots.len() > 1 {
        let mut best: Option<(f64, Vec<usize>, StructureNode)> = None;
        let mut consider = |loss: f64, used: Vec<usize>, node: StructureNode| {
            if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
                best = Some((loss, used, node));
            }
        };
        for i in 0..roots.len() {
            for j in i + 1..roots.len() {
                let node = StructureNode::adjacency(roots[i].0.clone(), roots[j].0.clone());
                consider(score(&enc, &dec, params, &node)?, vec![i, j], node);
            }
        }
        for c in candidates {
            let used: Option<Vec<usize>> =
                c.members.iter().map(|&b| roots.iter().position(|r| r.1 == Some(b))).collect();
            let Some(used) = used else { continue };
            let node = StructureNode::symmetry(StructureNode::Leaf(boxes[c.members[0]]), c.params);
            consider(score(&enc, &dec, params, &node)?, used, node);
        }
        let (_, mut used, node) = best.ok_or(RvnnError::NoBoxes)?;
        used.sort_unstable();
        let at = used[0];
        for &u in used.iter().rev() {
            roots.remove(u);
        }
        roots.insert(at, (node, None));
    }
    let root = roots.pop().expect("one root").0;
    Ok(StructureTree::new(root, "", "inferred"))
}
