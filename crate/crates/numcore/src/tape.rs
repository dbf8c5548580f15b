//! Define-by-run computation tape.
//!
//! Forward values are computed eagerly as operations are recorded; `backward`
//! replays the tape in reverse and accumulates gradients into per-parameter
//! buffers. Parameter nodes hold no value copy — their storage stays in the
//! [`ParamSet`] the tape borrows.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    /// `w` is `[m, n]`, `x` is `[n]`, output `[m]`.
    MatVec { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    AddN(Vec<NodeId>),
    Mul(NodeId, NodeId),
    /// Elementwise `mul * x + add`; only the factor matters to the gradient.
    Affine { x: NodeId, mul: f64 },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    /// One row of a 2-D parameter table.
    Row { table: ParamId, row: usize },
    /// Elementwise maximum over same-shape inputs; ties route to the first.
    MaxN(Vec<NodeId>),
    Softmax(NodeId),
    Sum(NodeId),
    /// Negative log-likelihood of `class` under a probability vector.
    Nll { probs: NodeId, class: usize },
    /// Binary cross-entropy of a scalar probability against target `y`.
    Bce { prob: NodeId, y: f64 },
    /// `1 - cos(a, b)`.
    CosineLoss { a: NodeId, b: NodeId },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    /// Empty for `Param` nodes; resolved through the borrowed `ParamSet`.
    value: Vec<f64>,
}

/// Loss kinds shared by the models built on this core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    BinaryCrossEntropy,
    Cosine,
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
    backward_done: bool,
}

const BCE_EPS: f64 = 1e-12;

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            backward_done: false,
        }
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let node = &self.nodes[id.0];
        match node.op {
            Op::Param(pid) => self.params.get(pid).values(),
            _ => &node.value,
        }
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op, shape, value });
        id
    }

    /// Leaf node holding explicit values.
    pub fn input(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<NodeId> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                op: "input",
                expected: format!("{:?} ({} values)", shape, expected),
                got: format!("{} values", values.len()),
            });
        }
        Ok(self.push(Op::Input, shape, values))
    }

    pub fn input1d(&mut self, values: Vec<f64>) -> NodeId {
        let shape = vec![values.len()];
        self.push(Op::Input, shape, values)
    }

    /// Whole parameter tensor as a node. Repeated requests share one node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let shape = self.params.get(id).shape().to_vec();
        let node = self.push(Op::Param(id), shape, Vec::new());
        self.param_nodes.insert(id, node);
        node
    }

    /// One row of a 2-D parameter table (embedding lookup).
    pub fn row(&mut self, table: ParamId, row: usize) -> Result<NodeId> {
        let t = self.params.get(table);
        if t.rank() != 2 {
            return Err(Error::ShapeMismatch {
                op: "row",
                expected: "2-D table".to_string(),
                got: format!("{:?}", t.shape()),
            });
        }
        let (rows, dim) = (t.shape()[0], t.shape()[1]);
        if row >= rows {
            return Err(Error::InvalidArgument(format!(
                "row {row} out of range for table `{}` with {rows} rows",
                self.params.name(table)
            )));
        }
        let value = t.values()[row * dim..(row + 1) * dim].to_vec();
        Ok(self.push(Op::Row { table, row }, vec![dim], value))
    }

    pub fn mat_vec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (ws, xs) = (self.shape(w).to_vec(), self.shape(x).to_vec());
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(Error::ShapeMismatch {
                op: "mat_vec",
                expected: format!("[m, n] x [n], weight {:?}", ws),
                got: format!("input {:?}", xs),
            });
        }
        let (m, n) = (ws[0], ws[1]);
        let wv = self.value(w);
        let xv = self.value(x);
        let mut out = vec![0.0; m];
        for i in 0..m {
            let row = &wv[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * xv[j];
            }
            out[i] = acc;
        }
        Ok(self.push(Op::MatVec { w, x }, vec![m], out))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op,
                expected: format!("{:?}", self.shape(a)),
                got: format!("{:?}", self.shape(b)),
            });
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Add(a, b), shape, out))
    }

    pub fn add_n(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput { op: "add_n" });
        }
        for &p in &parts[1..] {
            self.same_shape("add_n", parts[0], p)?;
        }
        let mut out = self.value(parts[0]).to_vec();
        for &p in &parts[1..] {
            for (o, v) in out.iter_mut().zip(self.value(p)) {
                *o += v;
            }
        }
        let shape = self.shape(parts[0]).to_vec();
        Ok(self.push(Op::AddN(parts), shape, out))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Op::Mul(a, b), shape, out))
    }

    pub fn affine(&mut self, x: NodeId, mul: f64, add: f64) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|v| mul * v + add).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Affine { x, mul }, shape, out)
    }

    /// Elementwise mean of same-shape nodes.
    pub fn mean_n(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        let k = parts.len();
        let sum = self.add_n(parts)?;
        Ok(self.affine(sum, 1.0 / k as f64, 0.0))
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Sigmoid(x), shape, out)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.value(x).iter().map(|v| v.tanh()).collect();
        let shape = self.shape(x).to_vec();
        self.push(Op::Tanh(x), shape, out)
    }

    /// Concatenate 1-D nodes.
    pub fn concat(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput { op: "concat" });
        }
        let mut out = Vec::new();
        for &p in &parts {
            if self.shape(p).len() != 1 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    expected: "1-D parts".to_string(),
                    got: format!("{:?}", self.shape(p)),
                });
            }
            out.extend_from_slice(self.value(p));
        }
        let shape = vec![out.len()];
        Ok(self.push(Op::Concat(parts), shape, out))
    }

    /// Elementwise maximum over same-shape nodes; ties resolve to the first.
    pub fn max_n(&mut self, parts: Vec<NodeId>) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::EmptyInput { op: "max_n" });
        }
        for &p in &parts[1..] {
            self.same_shape("max_n", parts[0], p)?;
        }
        let mut out = self.value(parts[0]).to_vec();
        for &p in &parts[1..] {
            for (o, v) in out.iter_mut().zip(self.value(p)) {
                if *v > *o {
                    *o = *v;
                }
            }
        }
        let shape = self.shape(parts[0]).to_vec();
        Ok(self.push(Op::MaxN(parts), shape, out))
    }

    /// Max-subtracted softmax over a 1-D node.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.is_empty() {
            return Err(Error::EmptyInput { op: "softmax" });
        }
        let out = softmax_values(xv);
        let shape = self.shape(x).to_vec();
        Ok(self.push(Op::Softmax(x), shape, out))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.value(x).iter().sum();
        self.push(Op::Sum(x), vec![1], vec![s])
    }

    /// `-log p[class]` for a probability vector `probs`.
    pub fn nll_loss(&mut self, probs: NodeId, class: usize) -> Result<NodeId> {
        let pv = self.value(probs);
        if class >= pv.len() {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for distribution of size {}",
                pv.len()
            )));
        }
        let v = -(pv[class].max(f64::MIN_POSITIVE)).ln();
        Ok(self.push(Op::Nll { probs, class }, vec![1], vec![v]))
    }

    /// Binary cross-entropy of a scalar probability node against `y`.
    pub fn bce_loss(&mut self, prob: NodeId, y: f64) -> Result<NodeId> {
        if self.value(prob).len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "bce_loss",
                expected: "[1]".to_string(),
                got: format!("{:?}", self.shape(prob)),
            });
        }
        let p = self.value(prob)[0].clamp(BCE_EPS, 1.0 - BCE_EPS);
        let v = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        Ok(self.push(Op::Bce { prob, y }, vec![1], vec![v]))
    }

    /// `1 - cos(a, b)`; errors on zero-norm input.
    pub fn cosine_loss(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("cosine_loss", a, b)?;
        let (na, nb) = (norm(self.value(a)), norm(self.value(b)));
        if na == 0.0 || nb == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let dot: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .sum();
        let v = 1.0 - dot / (na * nb);
        Ok(self.push(Op::CosineLoss { a, b }, vec![1], vec![v]))
    }

    /// Dispatching form of the loss operations.
    pub fn loss(&mut self, kind: LossKind, prediction: NodeId, target: LossTarget) -> Result<NodeId> {
        match (kind, target) {
            (LossKind::CrossEntropy, LossTarget::Class(c)) => self.nll_loss(prediction, c),
            (LossKind::BinaryCrossEntropy, LossTarget::Binary(y)) => self.bce_loss(prediction, y),
            (LossKind::Cosine, LossTarget::Node(t)) => self.cosine_loss(prediction, t),
            _ => Err(Error::InvalidArgument(
                "loss kind and target do not match".to_string(),
            )),
        }
    }

    /// Reverse pass from a scalar loss; fills a gradient buffer for every
    /// parameter (zero where the loss does not reach it).
    pub fn backward(&mut self, loss: NodeId) -> Result<Gradients> {
        if self.backward_done {
            return Err(Error::BackwardConsumed);
        }
        if self.value(loss).len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                expected: "scalar loss [1]".to_string(),
                got: format!("{:?}", self.shape(loss)),
            });
        }
        self.backward_done = true;

        let mut grads = Gradients::zeros_like(self.params);
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        node_grads[loss.0] = Some(vec![1.0]);

        for idx in (0..self.nodes.len()).rev() {
            let g = match node_grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(pid) => {
                    let buf = grads.get_mut(*pid);
                    for (b, gv) in buf.iter_mut().zip(&g) {
                        *b += gv;
                    }
                }
                Op::Row { table, row } => {
                    let dim = g.len();
                    let buf = grads.get_mut(*table);
                    for (k, gv) in g.iter().enumerate() {
                        buf[row * dim + k] += gv;
                    }
                }
                Op::MatVec { w, x } => {
                    let (w, x) = (*w, *x);
                    let n = self.value(x).len();
                    let m = g.len();
                    let xv = self.value(x).to_vec();
                    let wv = self.value(w).to_vec();
                    {
                        let gw = grad_buf(&mut node_grads, w, m * n);
                        for i in 0..m {
                            for j in 0..n {
                                gw[i * n + j] += g[i] * xv[j];
                            }
                        }
                    }
                    let gx = grad_buf(&mut node_grads, x, n);
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += wv[i * n + j] * g[i];
                        }
                        gx[j] += acc;
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    accumulate(&mut node_grads, a, &g);
                    accumulate(&mut node_grads, b, &g);
                }
                Op::AddN(parts) => {
                    for &p in &parts.clone() {
                        accumulate(&mut node_grads, p, &g);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let av = self.value(a).to_vec();
                    let bv = self.value(b).to_vec();
                    {
                        let ga = grad_buf(&mut node_grads, a, av.len());
                        for (k, gv) in g.iter().enumerate() {
                            ga[k] += gv * bv[k];
                        }
                    }
                    let gb = grad_buf(&mut node_grads, b, bv.len());
                    for (k, gv) in g.iter().enumerate() {
                        gb[k] += gv * av[k];
                    }
                }
                Op::Affine { x, mul } => {
                    let (x, mul) = (*x, *mul);
                    let gx = grad_buf(&mut node_grads, x, g.len());
                    for (k, gv) in g.iter().enumerate() {
                        gx[k] += mul * gv;
                    }
                }
                Op::Sigmoid(x) => {
                    let x = *x;
                    let sv = self.nodes[idx].value.clone();
                    let gx = grad_buf(&mut node_grads, x, g.len());
                    for (k, gv) in g.iter().enumerate() {
                        gx[k] += gv * sv[k] * (1.0 - sv[k]);
                    }
                }
                Op::Tanh(x) => {
                    let x = *x;
                    let tv = self.nodes[idx].value.clone();
                    let gx = grad_buf(&mut node_grads, x, g.len());
                    for (k, gv) in g.iter().enumerate() {
                        gx[k] += gv * (1.0 - tv[k] * tv[k]);
                    }
                }
                Op::Concat(parts) => {
                    let parts = parts.clone();
                    let mut offset = 0;
                    for p in parts {
                        let len = self.value(p).len();
                        let gp = grad_buf(&mut node_grads, p, len);
                        for k in 0..len {
                            gp[k] += g[offset + k];
                        }
                        offset += len;
                    }
                }
                Op::MaxN(parts) => {
                    let parts = parts.clone();
                    let out = self.nodes[idx].value.clone();
                    // Route each component to the first input attaining the max.
                    for k in 0..out.len() {
                        for &p in &parts {
                            if self.value(p)[k] == out[k] {
                                let len = out.len();
                                let gp = grad_buf(&mut node_grads, p, len);
                                gp[k] += g[k];
                                break;
                            }
                        }
                    }
                }
                Op::Softmax(x) => {
                    let x = *x;
                    let pv = self.nodes[idx].value.clone();
                    let dot: f64 = g.iter().zip(&pv).map(|(gv, p)| gv * p).sum();
                    let gx = grad_buf(&mut node_grads, x, pv.len());
                    for (k, p) in pv.iter().enumerate() {
                        gx[k] += p * (g[k] - dot);
                    }
                }
                Op::Sum(x) => {
                    let x = *x;
                    let len = self.value(x).len();
                    let gx = grad_buf(&mut node_grads, x, len);
                    for v in gx.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::Nll { probs, class } => {
                    let (probs, class) = (*probs, *class);
                    let p = self.value(probs)[class].max(f64::MIN_POSITIVE);
                    let len = self.value(probs).len();
                    let gp = grad_buf(&mut node_grads, probs, len);
                    gp[class] += -g[0] / p;
                }
                Op::Bce { prob, y } => {
                    let (prob, y) = (*prob, *y);
                    let p = self.value(prob)[0].clamp(BCE_EPS, 1.0 - BCE_EPS);
                    let gp = grad_buf(&mut node_grads, prob, 1);
                    gp[0] += g[0] * (p - y) / (p * (1.0 - p));
                }
                Op::CosineLoss { a, b } => {
                    let (a, b) = (*a, *b);
                    let av = self.value(a).to_vec();
                    let bv = self.value(b).to_vec();
                    let (na, nb) = (norm(&av), norm(&bv));
                    let dot: f64 = av.iter().zip(&bv).map(|(x, y)| x * y).sum();
                    let cos = dot / (na * nb);
                    {
                        let ga = grad_buf(&mut node_grads, a, av.len());
                        for k in 0..av.len() {
                            ga[k] += g[0] * (cos * av[k] / (na * na) - bv[k] / (na * nb));
                        }
                    }
                    let gb = grad_buf(&mut node_grads, b, bv.len());
                    for k in 0..bv.len() {
                        gb[k] += g[0] * (cos * bv[k] / (nb * nb) - av[k] / (na * nb));
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Target of the dispatching [`Tape::loss`] form.
#[derive(Debug, Clone, Copy)]
pub enum LossTarget {
    Class(usize),
    Binary(f64),
    Node(NodeId),
}

fn grad_buf(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, g: &[f64]) {
    let buf = grad_buf(grads, id, g.len());
    for (b, gv) in buf.iter_mut().zip(g) {
        *b += gv;
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_values(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = xs.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empty_params() -> ParamSet {
        ParamSet::new(0)
    }

    // Direct exp-normalize without max subtraction; the independent route.
    fn softmax_oracle(xs: &[f64]) -> Vec<f64> {
        let exps: Vec<f64> = xs.iter().map(|v| v.exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.iter().map(|e| e / sum).collect()
    }

    #[test]
    fn softmax_symmetric_input() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let x = t.input1d(vec![0.0, 0.0]);
        let s = t.softmax(x).unwrap();
        assert_eq!(t.value(s), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let x = t.input1d(vec![1000.0, 1000.0, 1000.0]);
        let s = t.softmax(x).unwrap();
        for v in t.value(s) {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
            assert!(v.is_finite());
        }
    }

    #[test]
    fn softmax_matches_exp_normalize_oracle() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let x = t.input1d(vec![1.0, 2.0, 3.0]);
        let s = t.softmax(x).unwrap();
        let expected = softmax_oracle(&[1.0, 2.0, 3.0]);
        for (got, want) in t.value(s).iter().zip(&expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rejects_empty_input() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let x = t.input1d(vec![]);
        assert!(t.softmax(x).is_err());
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let ps = empty_params();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-50.0..50.0)).collect();
            let c = rng.random_range(-100.0..100.0);
            let shifted: Vec<f64> = xs.iter().map(|v| v + c).collect();

            let mut t = Tape::new(&ps);
            let a = t.input1d(xs);
            let b = t.input1d(shifted);
            let sa = t.softmax(a).unwrap();
            let sb = t.softmax(b).unwrap();
            let sum: f64 = t.value(sa).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for (x, y) in t.value(sa).iter().zip(t.value(sb)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_entropy_matches_oracle() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let x = t.input1d(vec![1.0, 2.0, 3.0]);
        let s = t.softmax(x).unwrap();
        let loss = t.nll_loss(s, 2).unwrap();
        let expected = -softmax_oracle(&[1.0, 2.0, 3.0])[2].ln();
        assert!((t.value(loss)[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn binary_cross_entropy_at_half_is_ln_two() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let p = t.input1d(vec![0.5]);
        let loss = t.bce_loss(p, 1.0).unwrap();
        assert!((t.value(loss)[0] - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_loss_of_vector_with_itself_is_zero() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let a = t.input1d(vec![0.3, -1.2, 4.0]);
        let b = t.input1d(vec![0.3, -1.2, 4.0]);
        let loss = t.cosine_loss(a, b).unwrap();
        assert!(t.value(loss)[0].abs() < 1e-12);
    }

    #[test]
    fn cosine_loss_rejects_zero_norm() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let a = t.input1d(vec![0.0, 0.0]);
        let b = t.input1d(vec![1.0, 0.0]);
        assert!(matches!(t.cosine_loss(a, b), Err(Error::ZeroNorm)));
    }

    #[test]
    fn mat_vec_shape_error_names_both_shapes() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let w = t.input(vec![2, 3], vec![0.0; 6]).unwrap();
        let x = t.input1d(vec![0.0; 4]);
        let err = t.mat_vec(w, x).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[4]"), "got: {err}");
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let mut ps = ParamSet::new(5);
        let p = ps.add_uniform("x", vec![4], 1.0);
        let mut t = Tape::new(&ps);
        let x = t.param(p);
        let loss = t.sum(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(p), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn unreached_parameter_gets_zero_grad() {
        let mut ps = ParamSet::new(5);
        let used = ps.add_uniform("used", vec![2], 1.0);
        let unused = ps.add_uniform("unused", vec![3], 1.0);
        let mut t = Tape::new(&ps);
        let x = t.param(used);
        let loss = t.sum(x);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(used), &[1.0, 1.0]);
        assert_eq!(grads.get(unused), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_twice_without_new_forward_errors() {
        let mut ps = ParamSet::new(5);
        let p = ps.add_uniform("x", vec![2], 1.0);
        let mut t = Tape::new(&ps);
        let x = t.param(p);
        let loss = t.sum(x);
        t.backward(loss).unwrap();
        assert!(matches!(t.backward(loss), Err(Error::BackwardConsumed)));
    }

    #[test]
    fn shared_parameter_node_accumulates_once_per_use() {
        // loss = sum(p) + sum(p) should give gradient 2 everywhere.
        let mut ps = ParamSet::new(5);
        let p = ps.add_uniform("x", vec![3], 1.0);
        let mut t = Tape::new(&ps);
        let a = t.param(p);
        let b = t.param(p);
        assert_eq!(a, b);
        let s1 = t.sum(a);
        let s2 = t.sum(b);
        let loss = t.add(s1, s2).unwrap();
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(p), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn max_n_routes_gradient_to_first_maximum() {
        let mut ps = ParamSet::new(5);
        let a = ps.add_const("a", vec![2], 1.0);
        let b = ps.add_const("b", vec![2], 1.0);
        let mut t = Tape::new(&ps);
        let an = t.param(a);
        let bn = t.param(b);
        let m = t.max_n(vec![an, bn]).unwrap();
        let loss = t.sum(m);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(a), &[1.0, 1.0]);
        assert_eq!(grads.get(b), &[0.0, 0.0]);
    }

    #[test]
    fn loss_dispatch_rejects_mismatched_target() {
        let ps = empty_params();
        let mut t = Tape::new(&ps);
        let p = t.input1d(vec![0.5]);
        assert!(t
            .loss(LossKind::CrossEntropy, p, LossTarget::Binary(1.0))
            .is_err());
    }
}
