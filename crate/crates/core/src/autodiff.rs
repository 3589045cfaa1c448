//! Define-by-run reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records one forward pass. Leaves are created with
//! [`Tape::param`] (gradients wanted) or [`Tape::constant`]; every operator
//! appends a node whose parents already exist, so node order is a
//! topological order and [`Tape::backward`] simply walks it in reverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::fuzzy::sigmoid;
use crate::matrix::Matrix;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRowBroadcast(NodeId, NodeId),
    /// `a * s` with `s` a 1×1 node.
    Scale(NodeId, NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    ConcatCols(NodeId, NodeId),
    Sum(Vec<NodeId>),
    SoftmaxRows(NodeId),
    GatherColsSigned {
        a: NodeId,
        cols: Vec<usize>,
        signs: Vec<f64>,
    },
    ScatterColsSigned {
        d: NodeId,
        cols: Vec<usize>,
        signs: Vec<f64>,
    },
    SegmentSumRows {
        a: NodeId,
        segments: Vec<usize>,
    },
    GatherRows {
        a: NodeId,
        rows: Vec<usize>,
    },
    WeightedSum {
        a: NodeId,
        weights: Matrix,
    },
    BceMean {
        pred: NodeId,
        target: Matrix,
    },
    CeMean {
        prob: NodeId,
        target: Matrix,
    },
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` for nodes the loss does not depend on through parameters.
    pub fn get(&self, id: NodeId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn get_or_zero(&self, tape: &Tape, id: NodeId) -> Matrix {
        self.get(id).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(id).shape();
            Matrix::zeros(r, c)
        })
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    match indices.iter().find(|&&i| i >= len) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len }),
        None => Ok(()),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i.0].requires_grad)
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("add", va, vb));
        }
        let mut value = va.clone();
        value.add_assign(vb);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Adds the 1×cols row `bias` to every row of `a`.
    pub fn add_row_broadcast(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(shape_err("add_row_broadcast", va, vb));
        }
        let mut value = va.clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_mut(r).iter_mut().zip(vb.row(0)) {
                *x += b;
            }
        }
        let rg = self.any_grad(&[a, bias]);
        Ok(self.push(value, Op::AddRowBroadcast(a, bias), rg))
    }

    /// Multiplies every entry of `a` by the 1×1 node `s`.
    pub fn scale(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (va, vs) = (self.value(a), self.value(s));
        if vs.shape() != (1, 1) {
            return Err(shape_err("scale", va, vs));
        }
        let k = vs.item();
        let value = va.map(|x| x * k);
        let rg = self.any_grad(&[a, s]);
        Ok(self.push(value, Op::Scale(a, s), rg))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(shape_err("concat_cols", va, vb));
        }
        let cols = va.cols() + vb.cols();
        let mut data = Vec::with_capacity(va.rows() * cols);
        for r in 0..va.rows() {
            data.extend_from_slice(va.row(r));
            data.extend_from_slice(vb.row(r));
        }
        let value = Matrix::from_vec(va.rows(), cols, data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// Elementwise sum of same-shaped nodes.
    pub fn sum_nodes(&mut self, ids: &[NodeId]) -> Result<NodeId> {
        let first = *ids
            .first()
            .ok_or_else(|| invalid!("sum_nodes needs at least one node"))?;
        let mut value = self.value(first).clone();
        for &id in &ids[1..] {
            let v = self.value(id);
            if v.shape() != value.shape() {
                return Err(shape_err("sum_nodes", &value, v));
            }
            value.add_assign(v);
        }
        let rg = self.any_grad(ids);
        Ok(self.push(value, Op::Sum(ids.to_vec()), rg))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let mut value = va.clone();
        for r in 0..value.rows() {
            let s = crate::fuzzy::softmax(va.row(r));
            value.row_mut(r).copy_from_slice(&s);
        }
        let rg = self.any_grad(&[a]);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    /// Output column `i` is `signs[i] * a[:, cols[i]]`.
    pub fn gather_cols_signed(
        &mut self,
        a: NodeId,
        cols: &[usize],
        signs: &[f64],
    ) -> Result<NodeId> {
        if cols.len() != signs.len() {
            return Err(invalid!("{} columns but {} signs", cols.len(), signs.len()));
        }
        let va = self.value(a);
        check_indices(cols, va.cols())?;
        let mut value = Matrix::zeros(va.rows(), cols.len());
        for r in 0..va.rows() {
            for (i, (&c, &s)) in cols.iter().zip(signs).enumerate() {
                value[(r, i)] = s * va[(r, c)];
            }
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            value,
            Op::GatherColsSigned {
                a,
                cols: cols.to_vec(),
                signs: signs.to_vec(),
            },
            rg,
        ))
    }

    /// Inverse placement of [`Tape::gather_cols_signed`]: output column
    /// `cols[i]` receives `signs[i] * d[:, i]`; duplicate targets add up and
    /// untouched columns are zero.
    pub fn scatter_cols_signed(
        &mut self,
        d: NodeId,
        cols: &[usize],
        signs: &[f64],
        out_width: usize,
    ) -> Result<NodeId> {
        let vd = self.value(d);
        if cols.len() != signs.len() || vd.cols() != cols.len() {
            return Err(invalid!(
                "scatter of {} columns with {} indices and {} signs",
                vd.cols(),
                cols.len(),
                signs.len()
            ));
        }
        check_indices(cols, out_width)?;
        let mut value = Matrix::zeros(vd.rows(), out_width);
        for r in 0..vd.rows() {
            for (i, (&c, &s)) in cols.iter().zip(signs).enumerate() {
                value[(r, c)] += s * vd[(r, i)];
            }
        }
        let rg = self.any_grad(&[d]);
        Ok(self.push(
            value,
            Op::ScatterColsSigned {
                d,
                cols: cols.to_vec(),
                signs: signs.to_vec(),
            },
            rg,
        ))
    }

    /// Row `k` of the output sums the rows `r` of `a` with `segments[r] == k`.
    pub fn segment_sum_rows(
        &mut self,
        a: NodeId,
        segments: &[usize],
        n_segments: usize,
    ) -> Result<NodeId> {
        let va = self.value(a);
        if segments.len() != va.rows() {
            return Err(invalid!(
                "{} segment ids for {} rows",
                segments.len(),
                va.rows()
            ));
        }
        check_indices(segments, n_segments)?;
        let mut value = Matrix::zeros(n_segments, va.cols());
        for (r, &k) in segments.iter().enumerate() {
            for (o, x) in value.row_mut(k).iter_mut().zip(va.row(r)) {
                *o += x;
            }
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            value,
            Op::SegmentSumRows {
                a,
                segments: segments.to_vec(),
            },
            rg,
        ))
    }

    /// Output row `r` is `a[rows[r]]`.
    pub fn gather_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let va = self.value(a);
        check_indices(rows, va.rows())?;
        let value = va.select_rows(rows);
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            value,
            Op::GatherRows {
                a,
                rows: rows.to_vec(),
            },
            rg,
        ))
    }

    /// Columns `cols` of `a`, unsigned.
    pub fn select_cols(&mut self, a: NodeId, cols: &[usize]) -> Result<NodeId> {
        let signs = vec![1.0; cols.len()];
        self.gather_cols_signed(a, cols, &signs)
    }

    /// Scalar `sum(a ⊙ weights)`.
    pub fn weighted_sum(&mut self, a: NodeId, weights: Matrix) -> Result<NodeId> {
        let va = self.value(a);
        if va.shape() != weights.shape() {
            return Err(shape_err("weighted_sum", va, &weights));
        }
        let s = va
            .as_slice()
            .iter()
            .zip(weights.as_slice())
            .map(|(x, w)| x * w)
            .sum();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Matrix::scalar(s), Op::WeightedSum { a, weights }, rg))
    }

    /// Mean binary cross-entropy over all cells of `pred` (probabilities).
    pub fn bce_mean(&mut self, pred: NodeId, target: Matrix) -> Result<NodeId> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() || target.rows() == 0 {
            return Err(shape_err("bce_mean", vp, &target));
        }
        let n = (vp.rows() * vp.cols()) as f64;
        let total: f64 = vp
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&p, &t)| {
                let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(t * libm::log(p) + (1.0 - t) * libm::log(1.0 - p))
            })
            .sum();
        let rg = self.any_grad(&[pred]);
        Ok(self.push(Matrix::scalar(total / n), Op::BceMean { pred, target }, rg))
    }

    /// Mean over rows of `-sum_j t_j ln p_j` for row-stochastic `prob`.
    pub fn ce_mean(&mut self, prob: NodeId, target: Matrix) -> Result<NodeId> {
        let vp = self.value(prob);
        if vp.shape() != target.shape() || target.rows() == 0 {
            return Err(shape_err("ce_mean", vp, &target));
        }
        let n = vp.rows() as f64;
        let total: f64 = vp
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&p, &t)| -t * libm::log(p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)))
            .sum();
        let rg = self.any_grad(&[prob]);
        Ok(self.push(Matrix::scalar(total / n), Op::CeMean { prob, target }, rg))
    }

    /// Reverse sweep from the 1×1 node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let vl = self.value(loss);
        if vl.shape() != (1, 1) {
            return Err(invalid!("backward needs a 1x1 loss, got {:?}", vl.shape()));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[idx];
        let mut acc = |id: NodeId, contrib: Matrix| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            match &mut grads[id.0] {
                Some(existing) => existing.add_assign(&contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    acc(*a, g.matmul(&vb.transpose()).expect("matmul shapes"));
                }
                if self.requires_grad(*b) {
                    acc(*b, va.transpose().matmul(g).expect("matmul shapes"));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRowBroadcast(a, bias) => {
                acc(*a, g.clone());
                let mut gb = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (o, x) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*bias, gb);
            }
            Op::Scale(a, s) => {
                let k = self.value(*s).item();
                acc(*a, g.map(|x| x * k));
                let va = self.value(*a);
                let gs: f64 = g
                    .as_slice()
                    .iter()
                    .zip(va.as_slice())
                    .map(|(x, y)| x * y)
                    .sum();
                acc(*s, Matrix::scalar(gs));
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                let mut ga = g.clone();
                for (x, &v) in ga.as_mut_slice().iter_mut().zip(va.as_slice()) {
                    if v <= 0.0 {
                        *x = 0.0;
                    }
                }
                acc(*a, ga);
            }
            Op::Sigmoid(a) => {
                let mut ga = g.clone();
                for (x, &y) in ga.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                    *x *= y * (1.0 - y);
                }
                acc(*a, ga);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.value(*a).cols();
                let left: Vec<usize> = (0..ca).collect();
                let right: Vec<usize> = (ca..g.cols()).collect();
                acc(*a, g.select_cols(&left));
                acc(*b, g.select_cols(&right));
            }
            Op::Sum(ids) => {
                for &id in ids {
                    acc(id, g.clone());
                }
            }
            Op::SoftmaxRows(a) => {
                let s = &node.value;
                let mut ga = Matrix::zeros(s.rows(), s.cols());
                for r in 0..s.rows() {
                    let dot: f64 = g.row(r).iter().zip(s.row(r)).map(|(x, y)| x * y).sum();
                    for ((o, &gi), &si) in ga.row_mut(r).iter_mut().zip(g.row(r)).zip(s.row(r)) {
                        *o = si * (gi - dot);
                    }
                }
                acc(*a, ga);
            }
            Op::GatherColsSigned { a, cols, signs } => {
                let va = self.value(*a);
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                for r in 0..g.rows() {
                    for (i, (&c, &s)) in cols.iter().zip(signs).enumerate() {
                        ga[(r, c)] += s * g[(r, i)];
                    }
                }
                acc(*a, ga);
            }
            Op::ScatterColsSigned { d, cols, signs } => {
                let mut gd = Matrix::zeros(g.rows(), cols.len());
                for r in 0..g.rows() {
                    for (i, (&c, &s)) in cols.iter().zip(signs).enumerate() {
                        gd[(r, i)] = s * g[(r, c)];
                    }
                }
                acc(*d, gd);
            }
            Op::SegmentSumRows { a, segments } => {
                acc(*a, g.select_rows(segments));
            }
            Op::GatherRows { a, rows } => {
                let va = self.value(*a);
                let mut ga = Matrix::zeros(va.rows(), va.cols());
                for (r, &src) in rows.iter().enumerate() {
                    for (o, x) in ga.row_mut(src).iter_mut().zip(g.row(r)) {
                        *o += x;
                    }
                }
                acc(*a, ga);
            }
            Op::WeightedSum { a, weights } => {
                let k = g.item();
                acc(*a, weights.map(|w| w * k));
            }
            Op::BceMean { pred, target } => {
                let vp = self.value(*pred);
                let k = g.item() / (vp.rows() * vp.cols()) as f64;
                let mut gp = vp.clone();
                for (x, &t) in gp.as_mut_slice().iter_mut().zip(target.as_slice()) {
                    let p = *x;
                    *x = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                        k * (-(t / p) + (1.0 - t) / (1.0 - p))
                    } else {
                        0.0
                    };
                }
                acc(*pred, gp);
            }
            Op::CeMean { prob, target } => {
                let vp = self.value(*prob);
                let k = g.item() / vp.rows() as f64;
                let mut gp = vp.clone();
                for (x, &t) in gp.as_mut_slice().iter_mut().zip(target.as_slice()) {
                    let p = *x;
                    *x = if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                        -k * t / p
                    } else {
                        0.0
                    };
                }
                acc(*prob, gp);
            }
        }
    }
}

/// Relative error used by [`finite_diff_check`]: `|a - n| / max(|a|, |n|, floor)`.
pub const GRADCHECK_FLOOR: f64 = 1e-4;

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step `h`, over every entry of every input.
///
/// `f` receives a fresh tape and one parameter node per input and must return
/// a 1×1 node. Returns the largest relative error, with the denominator
/// floored at [`GRADCHECK_FLOOR`] so that near-zero gradients are compared
/// absolutely.
pub fn finite_diff_check<F>(f: F, inputs: &[Matrix], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    let eval = |values: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = values.iter().map(|v| tape.constant(v.clone())).collect();
        let out = f(&mut tape, &ids)?;
        Ok(tape.value(out).item())
    };

    let mut tape = Tape::new();
    let ids: Vec<NodeId> = inputs.iter().map(|v| tape.param(v.clone())).collect();
    let out = f(&mut tape, &ids)?;
    let grads = tape.backward(out)?;

    let mut worst: f64 = 0.0;
    let mut work: Vec<Matrix> = inputs.to_vec();
    for (k, id) in ids.iter().enumerate() {
        let analytic = grads.get_or_zero(&tape, *id);
        for j in 0..inputs[k].as_slice().len() {
            let orig = inputs[k].as_slice()[j];
            work[k].as_mut_slice()[j] = orig + h;
            let up = eval(&work)?;
            work[k].as_mut_slice()[j] = orig - h;
            let down = eval(&work)?;
            work[k].as_mut_slice()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.as_slice()[j];
            let denom = libm::fabs(a).max(libm::fabs(numeric)).max(GRADCHECK_FLOOR);
            worst = worst.max(libm::fabs(a - numeric) / denom);
        }
    }
    Ok(worst)
}
