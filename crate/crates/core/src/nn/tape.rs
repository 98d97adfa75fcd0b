//! Reverse-mode autodiff over a flat list of vector-valued nodes.

use super::ops::{self, ConvShape};
use super::params::{Gradients, ParamId, ParamStore};
use super::NnError;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Affine { w: ParamId, b: ParamId, x: Var, rows: usize, cols: usize },
    Tanh(Var),
    Slice { x: Var, start: usize },
    Concat(Vec<Var>),
    Conv { w: ParamId, b: ParamId, x: Var, shape: ConvShape },
    SquaredError { x: Var, target: Vec<f64> },
    SoftmaxCe { x: Var, class: usize },
    Sum(Vec<Var>),
    Scale(Var, f64),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Records a forward computation against a [`ParamStore`]; `backward`
/// replays it in exact reverse creation order.
pub struct Tape<'a> {
    params: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a ParamStore) -> Self {
        Self { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'a ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Scalar value of a length-1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Input, value)
    }

    /// `W x + b` where `W` is a `[rows, cols]` parameter and `b` a `[rows]` one.
    pub fn affine(&mut self, w: ParamId, b: ParamId, x: Var) -> Result<Var, NnError> {
        let ws = self.params.shape(w);
        let (rows, cols) = match ws {
            [r, c] => (*r, *c),
            _ => return Err(NnError::Shape(format!("{} is not a matrix", self.params.param(w).name))),
        };
        let xl = self.value(x).len();
        if xl != cols || self.params.value(b).len() != rows {
            return Err(NnError::Shape(format!(
                "{}: {rows}x{cols} applied to length {xl} with bias {}",
                self.params.param(w).name,
                self.params.value(b).len()
            )));
        }
        let y = ops::affine(self.params.value(w), self.params.value(b), self.value(x), rows, cols);
        Ok(self.push(Op::Affine { w, b, x, rows, cols }, y))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).iter().map(|v| v.tanh()).collect();
        self.push(Op::Tanh(x), y)
    }

    pub fn affine_tanh(&mut self, w: ParamId, b: ParamId, x: Var) -> Result<Var, NnError> {
        let a = self.affine(w, b, x)?;
        Ok(self.tanh(a))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let src = self.value(x);
        if start + len > src.len() {
            return Err(NnError::Shape(format!("slice {start}..{} of length {}", start + len, src.len())));
        }
        let y = src[start..start + len].to_vec();
        Ok(self.push(Op::Slice { x, start }, y))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let y = parts.iter().flat_map(|&p| self.value(p).iter().copied()).collect();
        self.push(Op::Concat(parts.to_vec()), y)
    }

    pub fn conv2d(&mut self, w: ParamId, b: ParamId, x: Var, shape: ConvShape) -> Result<Var, NnError> {
        if self.value(x).len() != shape.input_len()
            || self.params.value(w).len() != shape.weight_len()
            || self.params.value(b).len() != shape.out_channels
        {
            return Err(NnError::Shape(format!("conv {shape:?} does not match its operands")));
        }
        let y = ops::conv2d(&shape, self.params.value(w), self.params.value(b), self.value(x));
        Ok(self.push(Op::Conv { w, b, x, shape }, y))
    }

    /// `Σ (x − target)²`.
    pub fn squared_error(&mut self, x: Var, target: &[f64]) -> Result<Var, NnError> {
        let xv = self.value(x);
        if xv.len() != target.len() {
            return Err(NnError::Shape(format!("squared error: {} vs {}", xv.len(), target.len())));
        }
        let s = xv.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(self.push(Op::SquaredError { x, target: target.to_vec() }, vec![s]))
    }

    pub fn softmax_ce(&mut self, logits: Var, class: usize) -> Result<Var, NnError> {
        let l = ops::softmax_cross_entropy(self.value(logits), class)?;
        Ok(self.push(Op::SoftmaxCe { x: logits, class }, vec![l]))
    }

    /// Sum of scalar nodes. An empty sum is zero.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        let s = terms.iter().map(|&t| self.scalar(t)).sum();
        self.push(Op::Sum(terms.to_vec()), vec![s])
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let y = self.value(x).iter().map(|v| v * factor).collect();
        self.push(Op::Scale(x, factor), y)
    }

    /// Back-propagates from the scalar `out`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, out: Var, grads: &mut Gradients) -> Result<(), NnError> {
        if self.nodes[out.0].value.len() != 1 {
            return Err(NnError::Shape("backward needs a scalar output".into()));
        }
        let mut adj: Vec<Vec<f64>> = vec![Vec::new(); out.0 + 1];
        adj[out.0] = vec![1.0];
        for i in (0..=out.0).rev() {
            let g = std::mem::take(&mut adj[i]);
            if g.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Affine { w, b, x, rows, cols } => {
                    let xv = self.value(*x);
                    {
                        let dw = grads.get_mut(*w);
                        for r in 0..*rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for (d, xi) in dw[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                                    *d += gr * xi;
                                }
                            }
                        }
                    }
                    for (d, gr) in grads.get_mut(*b).iter_mut().zip(&g) {
                        *d += gr;
                    }
                    if self.needs_grad(*x) {
                        let wv = self.params.value(*w);
                        let dx = slot(&mut adj, *x, *cols);
                        for r in 0..*rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for (d, wi) in dx.iter_mut().zip(&wv[r * cols..(r + 1) * cols]) {
                                    *d += gr * wi;
                                }
                            }
                        }
                    }
                }
                Op::Tanh(x) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for ((d, gi), y) in dx.iter_mut().zip(&g).zip(&node.value) {
                        *d += gi * (1.0 - y * y);
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.value(*x).len();
                    let dx = slot(&mut adj, *x, n);
                    for (d, gi) in dx[*start..*start + g.len()].iter_mut().zip(&g) {
                        *d += gi;
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.value(p).len();
                        let dx = slot(&mut adj, p, n);
                        for (d, gi) in dx.iter_mut().zip(&g[off..off + n]) {
                            *d += gi;
                        }
                        off += n;
                    }
                }
                Op::Conv { w, b, x, shape } => {
                    let xv = self.value(*x);
                    let wv = self.params.value(*w);
                    let mut dw = std::mem::take(&mut grads.bufs[w.0]);
                    let mut db = std::mem::take(&mut grads.bufs[b.0]);
                    if self.needs_grad(*x) {
                        let dx = slot(&mut adj, *x, xv.len());
                        ops::conv2d_backward(shape, wv, xv, &g, &mut dw, &mut db, Some(dx));
                    } else {
                        ops::conv2d_backward(shape, wv, xv, &g, &mut dw, &mut db, None);
                    }
                    grads.bufs[w.0] = dw;
                    grads.bufs[b.0] = db;
                }
                Op::SquaredError { x, target } => {
                    let xv = self.value(*x);
                    let dx = slot(&mut adj, *x, xv.len());
                    for ((d, a), t) in dx.iter_mut().zip(xv).zip(target) {
                        *d += g[0] * 2.0 * (a - t);
                    }
                }
                Op::SoftmaxCe { x, class } => {
                    let p = ops::softmax(self.value(*x));
                    let dx = slot(&mut adj, *x, p.len());
                    for (k, (d, pk)) in dx.iter_mut().zip(&p).enumerate() {
                        let onehot = if k == *class { 1.0 } else { 0.0 };
                        *d += g[0] * (pk - onehot);
                    }
                }
                Op::Sum(terms) => {
                    for &t in terms {
                        slot(&mut adj, t, 1)[0] += g[0];
                    }
                }
                Op::Scale(x, f) => {
                    let dx = slot(&mut adj, *x, g.len());
                    for (d, gi) in dx.iter_mut().zip(&g) {
                        *d += gi * f;
                    }
                }
            }
        }
        Ok(())
    }

    /// Inputs never need a gradient; everything else might.
    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Input)
    }
}

fn slot(adj: &mut [Vec<f64>], v: Var, len: usize) -> &mut [f64] {
    let s = &mut adj[v.0];
    if s.is_empty() {
        *s = vec![0.0; len];
    }
    s
}
