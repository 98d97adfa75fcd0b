use crate::geometry::{OrientedBox, SymmetryParams, BOX_PARAMS, SYMMETRY_PARAMS};
use crate::nn::{ops, ParamSpec, ParamStore, Tape, Var};
use crate::structure::{validate_with, Limits, NodeKind, StructureNode, StructureTree};

use super::mlp::{mlp_specs, Mlp};
use super::{RvnnConfig, RvnnError, NUM_CLASSES};

/// The decoder bundle (adjacency, symmetry, box) and the node classifier,
/// bound to parameter ids of a store built from [`Decoders::specs`].
#[derive(Clone, Debug)]
pub struct Decoders {
    cfg: RvnnConfig,
    adj: Mlp,
    sym: Mlp,
    boxes: Mlp,
    cls: Mlp,
}

/// Per-term totals of a teacher-forced pass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub box_se: f64,
    pub sym_se: f64,
    pub ce: f64,
    pub nodes: usize,
    pub leaves: usize,
    pub symmetries: usize,
    /// Nodes whose classifier argmax matched the true kind.
    pub correct: usize,
}

impl LossBreakdown {
    pub fn add(&mut self, o: &LossBreakdown) {
        self.total += o.total;
        self.box_se += o.box_se;
        self.sym_se += o.sym_se;
        self.ce += o.ce;
        self.nodes += o.nodes;
        self.leaves += o.leaves;
        self.symmetries += o.symmetries;
        self.correct += o.correct;
    }

    /// Box squared error averaged over every raw box parameter.
    pub fn mean_box_se(&self) -> f64 {
        if self.leaves == 0 {
            0.0
        } else {
            self.box_se / (self.leaves * BOX_PARAMS) as f64
        }
    }

    pub fn class_accuracy(&self) -> f64 {
        if self.nodes == 0 {
            1.0
        } else {
            self.correct as f64 / self.nodes as f64
        }
    }
}

fn layer_dims(cfg: &RvnnConfig, input: usize, out: usize) -> Vec<usize> {
    if cfg.two_layer {
        vec![input, cfg.hidden, out]
    } else {
        vec![input, out]
    }
}

/// Classifier decision with ties resolved to Leaf.
fn decide(logits: &[f64]) -> NodeKind {
    let leaf = NodeKind::Leaf.class_index();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if logits[leaf] >= max {
        NodeKind::Leaf
    } else {
        NodeKind::from_class_index(ops::argmax(logits)).unwrap_or(NodeKind::Leaf)
    }
}

impl Decoders {
    pub fn specs(cfg: &RvnnConfig) -> Vec<ParamSpec> {
        let n = cfg.code_dim;
        [
            mlp_specs("dec.adj", &layer_dims(cfg, n, 2 * n)),
            mlp_specs("dec.sym", &layer_dims(cfg, n, n + SYMMETRY_PARAMS)),
            mlp_specs("dec.box", &layer_dims(cfg, n, BOX_PARAMS)),
            mlp_specs("cls", &layer_dims(cfg, n, NUM_CLASSES)),
        ]
        .concat()
    }

    pub fn bind(params: &ParamStore, cfg: &RvnnConfig) -> Result<Self, RvnnError> {
        let layers = if cfg.two_layer { 2 } else { 1 };
        Ok(Self {
            cfg: *cfg,
            adj: Mlp::bind(params, "dec.adj", layers, true)?,
            sym: Mlp::bind(params, "dec.sym", layers, true)?,
            boxes: Mlp::bind(params, "dec.box", layers, true)?,
            cls: Mlp::bind(params, "cls", layers, false)?,
        })
    }

    pub fn config(&self) -> &RvnnConfig {
        &self.cfg
    }

    pub fn check_code(&self, code: &[f64]) -> Result<(), RvnnError> {
        if code.len() != self.cfg.code_dim {
            return Err(RvnnError::CodeLength { expected: self.cfg.code_dim, found: code.len() });
        }
        if !code.iter().all(|v| v.is_finite()) {
            return Err(RvnnError::NonFiniteCode);
        }
        Ok(())
    }

    /// Class logits (Adjacency, Symmetry, Leaf order).
    pub fn classify(&self, tape: &mut Tape, code: Var) -> Result<Var, RvnnError> {
        Ok(self.cls.forward(tape, code)?)
    }

    pub fn decode_adjacency(&self, tape: &mut Tape, p: Var) -> Result<(Var, Var), RvnnError> {
        let n = self.cfg.code_dim;
        let out = self.adj.forward(tape, p)?;
        Ok((tape.slice(out, 0, n)?, tape.slice(out, n, n)?))
    }

    /// Generator code and raw symmetry parameters.
    pub fn decode_symmetry(&self, tape: &mut Tape, p: Var) -> Result<(Var, Var), RvnnError> {
        let n = self.cfg.code_dim;
        let out = self.sym.forward(tape, p)?;
        Ok((tape.slice(out, 0, n)?, tape.slice(out, n, SYMMETRY_PARAMS)?))
    }

    /// Raw 12-vector box parameters.
    pub fn decode_box(&self, tape: &mut Tape, p: Var) -> Result<Var, RvnnError> {
        Ok(self.boxes.forward(tape, p)?)
    }

    /// Greedy recursive decoding of a root code.
    ///
    /// At `max_depth` a node is forced to be a leaf. A node is also forced to
    /// a leaf when expanding it could push the flattened tree past
    /// `max_boxes`, so the result always validates.
    pub fn decode_structure(&self, params: &ParamStore, root: &[f64]) -> Result<StructureTree, RvnnError> {
        self.check_code(root)?;
        let mut tape = Tape::new(params);
        let r = tape.input(root.to_vec());
        // lower bound on the final box count: committed leaves plus the
        // multiplier of every node still to be decoded
        let mut bound = 1usize;
        let node = self.decode_node(&mut tape, r, 0, 1, &mut bound)?;
        let tree = StructureTree::new(node, "", "decoded");
        let limits = Limits { max_depth: self.cfg.max_depth, max_boxes: self.cfg.max_boxes, ..Limits::structural() };
        let v = validate_with(&tree, &limits);
        if !v.is_empty() {
            return Err(RvnnError::InvalidTarget(v.iter().map(|v| v.to_string()).collect()));
        }
        Ok(tree)
    }

    fn decode_node(
        &self,
        tape: &mut Tape,
        code: Var,
        depth: usize,
        mult: usize,
        bound: &mut usize,
    ) -> Result<StructureNode, RvnnError> {
        let kind = if depth >= self.cfg.max_depth {
            NodeKind::Leaf
        } else {
            let logits = self.classify(tape, code)?;
            decide(tape.value(logits))
        };
        match kind {
            NodeKind::Adjacency if *bound + mult <= self.cfg.max_boxes => {
                *bound += mult;
                let (a, b) = self.decode_adjacency(tape, code)?;
                let a = self.decode_node(tape, a, depth + 1, mult, bound)?;
                let b = self.decode_node(tape, b, depth + 1, mult, bound)?;
                Ok(StructureNode::adjacency(a, b))
            }
            NodeKind::Symmetry => {
                let (g, s) = self.decode_symmetry(tape, code)?;
                let raw: [f64; SYMMETRY_PARAMS] = tape.value(s).try_into().expect("slice length");
                let params = SymmetryParams::from_raw(&raw);
                let k = params.multiplier();
                if *bound + mult * (k - 1) > self.cfg.max_boxes {
                    return self.leaf(tape, code);
                }
                *bound += mult * (k - 1);
                let child = self.decode_node(tape, g, depth + 1, mult * k, bound)?;
                Ok(StructureNode::symmetry(child, params))
            }
            _ => self.leaf(tape, code),
        }
    }

    fn leaf(&self, tape: &mut Tape, code: Var) -> Result<StructureNode, RvnnError> {
        let b = self.decode_box(tape, code)?;
        let raw: [f64; BOX_PARAMS] = tape.value(b).try_into().expect("box length");
        Ok(StructureNode::Leaf(OrientedBox::from_raw(&raw)))
    }

    /// Decodes along the topology of `target`, accumulating weighted
    /// classification cross entropy at every node and squared error on raw
    /// box and symmetry parameters. Returns the scalar loss node.
    ///
    /// The target is not validated here; see [`teacher_forced_loss`].
    pub fn teacher_forced(
        &self,
        tape: &mut Tape,
        root: Var,
        target: &StructureNode,
    ) -> Result<(Var, LossBreakdown), RvnnError> {
        let mut terms = Vec::new();
        let mut br = LossBreakdown::default();
        self.teacher_node(tape, root, target, &mut terms, &mut br)?;
        let total = tape.sum(&terms);
        br.total = tape.scalar(total);
        Ok((total, br))
    }

    fn teacher_node(
        &self,
        tape: &mut Tape,
        code: Var,
        target: &StructureNode,
        terms: &mut Vec<Var>,
        br: &mut LossBreakdown,
    ) -> Result<(), RvnnError> {
        let w = self.cfg.weights;
        let logits = self.classify(tape, code)?;
        let kind = target.kind();
        if ops::argmax(tape.value(logits)) == kind.class_index() {
            br.correct += 1;
        }
        br.nodes += 1;
        let ce = tape.softmax_ce(logits, kind.class_index())?;
        br.ce += tape.scalar(ce);
        terms.push(tape.scale(ce, w.ce));
        match target {
            StructureNode::Leaf(b) => {
                let out = self.decode_box(tape, code)?;
                let se = tape.squared_error(out, &b.to_raw())?;
                br.box_se += tape.scalar(se);
                br.leaves += 1;
                terms.push(tape.scale(se, w.box_se));
            }
            StructureNode::Adjacency(children) => {
                let (a, b) = self.decode_adjacency(tape, code)?;
                self.teacher_node(tape, a, &children[0], terms, br)?;
                self.teacher_node(tape, b, &children[1], terms, br)?;
            }
            StructureNode::Symmetry { params, children } => {
                let (g, s) = self.decode_symmetry(tape, code)?;
                let se = tape.squared_error(s, &params.to_raw())?;
                br.sym_se += tape.scalar(se);
                br.symmetries += 1;
                terms.push(tape.scale(se, w.sym_se));
                self.teacher_node(tape, g, &children[0], terms, br)?;
            }
        }
        Ok(())
    }
}

/// Class probabilities for one code.
pub fn classify_node(
    params: &ParamStore,
    cfg: &RvnnConfig,
    code: &[f64],
) -> Result<[f64; NUM_CLASSES], RvnnError> {
    let d = Decoders::bind(params, cfg)?;
    d.check_code(code)?;
    let mut tape = Tape::new(params);
    let c = tape.input(code.to_vec());
    let logits = d.classify(&mut tape, c)?;
    let p = ops::softmax(tape.value(logits));
    Ok([p[0], p[1], p[2]])
}

pub fn decode_structure(params: &ParamStore, cfg: &RvnnConfig, root: &[f64]) -> Result<StructureTree, RvnnError> {
    Decoders::bind(params, cfg)?.decode_structure(params, root)
}

/// Teacher-forced loss of a fixed root code against a valid target tree.
/// With `grads`, parameter gradients are added into it.
pub fn teacher_forced_loss(
    params: &ParamStore,
    cfg: &RvnnConfig,
    root: &[f64],
    target: &StructureTree,
    grads: Option<&mut crate::nn::Gradients>,
) -> Result<LossBreakdown, RvnnError> {
    check_target(target, cfg)?;
    let d = Decoders::bind(params, cfg)?;
    d.check_code(root)?;
    let mut tape = Tape::new(params);
    let r = tape.input(root.to_vec());
    let (loss, br) = d.teacher_forced(&mut tape, r, &target.root)?;
    if let Some(g) = grads {
        tape.backward(loss, g)?;
    }
    Ok(br)
}

/// Rejects targets that violate structural limits.
pub fn check_target(target: &StructureTree, cfg: &RvnnConfig) -> Result<(), RvnnError> {
    let limits = Limits { max_depth: cfg.max_depth.max(crate::structure::DEFAULT_MAX_DEPTH), ..Limits::default() };
    let v = validate_with(target, &limits);
    if v.is_empty() {
        Ok(())
    } else {
        Err(RvnnError::InvalidTarget(v.iter().map(|v| v.to_string()).collect()))
    }
}
