use std::sync::Arc;

use ndarray::{s, Axis, Zip};

use crate::{Tensor, TapeError};

/// Handle to a node on a [`Tape`].
///
/// A `Var` is only meaningful for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A fused operation with a hand-written adjoint.
///
/// The forward value is computed by the caller and handed to
/// [`Tape::custom`]; the tape only needs the reverse rule.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;

    /// Returns one vector-Jacobian product per input, `None` where the input
    /// receives no gradient.
    fn vjp(&self, inputs: &[&Tensor], output: &Tensor, grad_output: &Tensor) -> Vec<Option<Tensor>>;
}

enum Op {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Arc<Vec<usize>>),
    ScatterAddRows(Var, Arc<Vec<usize>>),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Softplus(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Norm(Var),
    LayerNorm { src: Var, inv_std: Vec<f64> },
    StopGradient,
    Custom { inputs: Vec<Var>, op: Box<dyn CustomOp> },
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

/// Append-only record of evaluated operations.
///
/// Nodes are stored in evaluation order, which is a topological order of
/// the computation graph by construction.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dims(t: &Tensor) -> [usize; 2] {
    let (r, c) = t.dim();
    [r, c]
}

fn broadcast_dim(a: usize, b: usize) -> Option<usize> {
    if a == b {
        Some(a)
    } else if a == 1 {
        Some(b)
    } else if b == 1 {
        Some(a)
    } else {
        None
    }
}

/// Sums `grad` down to `shape` along broadcast axes.
fn reduce_to(grad: Tensor, shape: [usize; 2]) -> Tensor {
    let mut g = grad;
    if shape[0] == 1 && g.nrows() != 1 {
        g = g.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape[1] == 1 && g.ncols() != 1 {
        g = g.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    g
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
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

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// Trainable input. Receives a gradient from [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar_constant(&mut self, value: f64) -> Var {
        self.constant(crate::scalar(value))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        dims(&self.nodes[v.0].value)
    }

    /// Value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[(0, 0)]
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.tracked(v)
    }

    fn binary_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), TapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        match (broadcast_dim(sa[0], sb[0]), broadcast_dim(sa[1], sb[1])) {
            (Some(_), Some(_)) => Ok(()),
            _ => Err(TapeError::Shape { op, lhs: sa, rhs: sb }),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary_shape("add", a, b)?;
        let value = self.value(a) + self.value(b);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Add(a, b), tracked))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary_shape("sub", a, b)?;
        let value = self.value(a) - self.value(b);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Sub(a, b), tracked))
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        self.binary_shape("mul", a, b)?;
        let value = self.value(a) * self.value(b);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::Mul(a, b), tracked))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = -self.value(a);
        let tracked = self.tracked(a);
        self.push(value, Op::Neg(a), tracked)
    }

    /// Multiplication by a fixed real number.
    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a) * factor;
        let tracked = self.tracked(a);
        self.push(value, Op::Scale(a, factor), tracked)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TapeError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa[1] != sb[0] {
            return Err(TapeError::Shape { op: "matmul", lhs: sa, rhs: sb });
        }
        let value = self.value(a).dot(self.value(b));
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, Op::MatMul(a, b), tracked))
    }

    /// Horizontal concatenation. All parts must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TapeError> {
        let first = *parts.first().ok_or(TapeError::Contract {
            op: "concat_cols",
            msg: "no inputs".into(),
        })?;
        let rows = self.shape(first)[0];
        let mut cols = 0;
        for &p in parts {
            let sp = self.shape(p);
            if sp[0] != rows {
                return Err(TapeError::Shape { op: "concat_cols", lhs: self.shape(first), rhs: sp });
            }
            cols += sp[1];
        }
        let mut value = Tensor::zeros((rows, cols));
        let mut at = 0;
        for &p in parts {
            let w = self.shape(p)[1];
            value.slice_mut(s![.., at..at + w]).assign(self.value(p));
            at += w;
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, TapeError> {
        let sa = self.shape(a);
        if start > end || end > sa[1] {
            return Err(TapeError::Shape { op: "slice_cols", lhs: sa, rhs: [start, end] });
        }
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::SliceCols(a, start), tracked))
    }

    /// Row `k` of the output is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<Vec<usize>>) -> Result<Var, TapeError> {
        let sa = self.shape(a);
        let src = self.value(a);
        let mut value = Tensor::zeros((index.len(), sa[1]));
        for (k, &i) in index.iter().enumerate() {
            if i >= sa[0] {
                return Err(TapeError::Index { op: "gather_rows", index: i, len: sa[0] });
            }
            value.row_mut(k).assign(&src.row(i));
        }
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::GatherRows(a, index), tracked))
    }

    /// Row `index[k]` of the `rows`-row output accumulates row `k` of `a`.
    ///
    /// Accumulation runs in increasing `k`, so the result does not depend on
    /// the thread layout of the caller.
    pub fn scatter_add_rows(&mut self, a: Var, index: Arc<Vec<usize>>, rows: usize) -> Result<Var, TapeError> {
        let sa = self.shape(a);
        if index.len() != sa[0] {
            return Err(TapeError::Shape { op: "scatter_add_rows", lhs: sa, rhs: [index.len(), rows] });
        }
        let src = self.value(a);
        let mut value = Tensor::zeros((rows, sa[1]));
        for (k, &i) in index.iter().enumerate() {
            if i >= rows {
                return Err(TapeError::Index { op: "scatter_add_rows", index: i, len: rows });
            }
            let mut dst = value.row_mut(i);
            dst += &src.row(k);
        }
        let tracked = self.tracked(a);
        Ok(self.push(value, Op::ScatterAddRows(a, index), tracked))
    }

    /// Rectified linear unit. The derivative at exactly zero is taken as 0.
    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let tracked = self.tracked(a);
        self.push(value, Op::Relu(a), tracked)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let tracked = self.tracked(a);
        self.push(value, Op::Tanh(a), tracked)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        let tracked = self.tracked(a);
        self.push(value, Op::Exp(a), tracked)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(softplus);
        let tracked = self.tracked(a);
        self.push(value, Op::Softplus(a), tracked)
    }

    /// Sum of all entries as a `1×1` tensor.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = crate::scalar(self.value(a).sum());
        let tracked = self.tracked(a);
        self.push(value, Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = crate::scalar(t.sum() / t.len().max(1) as f64);
        let tracked = self.tracked(a);
        self.push(value, Op::Mean(a), tracked)
    }

    /// Per-row sum, `R×C → R×1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let tracked = self.tracked(a);
        self.push(value, Op::SumCols(a), tracked)
    }

    /// Euclidean norm over all entries. The gradient at the origin is 0.
    pub fn norm(&mut self, a: Var) -> Var {
        let value = crate::scalar(self.value(a).iter().map(|x| x * x).sum::<f64>().sqrt());
        let tracked = self.tracked(a);
        self.push(value, Op::Norm(a), tracked)
    }

    /// Normalizes every row to zero mean and unit variance.
    ///
    /// Gain and bias are left to the caller (a broadcast `mul` and `add`).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Var {
        let x = self.value(a);
        let cols = x.ncols() as f64;
        let mut value = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in value.rows_mut() {
            let mean = row.sum() / cols;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mean) * is);
            inv_std.push(is);
        }
        let tracked = self.tracked(a);
        self.push(value, Op::LayerNorm { src: a, inv_std }, tracked)
    }

    /// Same value as `a`, no gradient edge.
    pub fn stop_gradient(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(value, Op::StopGradient, false)
    }

    /// Records a fused operation whose forward value was computed by the
    /// caller.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        let tracked = inputs.iter().any(|&v| self.tracked(v));
        self.push(value, Op::Custom { inputs: inputs.to_vec(), op }, tracked)
    }

    /// Reverse sweep from a `1×1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TapeError> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(TapeError::NonScalarLoss { shape });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        if self.tracked(loss) {
            grads[loss.0] = Some(crate::scalar(1.0));
        }

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            // keep the gradient of interior nodes around for inspection
            grads[idx] = Some(g);
        }

        let leaves = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Leaf))
            .map(|(i, _)| i)
            .collect();
        Ok(Gradients { grads, shapes: self.nodes.iter().map(|n| dims(&n.value)).collect(), leaves })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, contrib: Tensor| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &contrib,
                slot @ None => *slot = Some(contrib),
            }
        };

        match &node.op {
            Op::Leaf | Op::Constant | Op::StopGradient => {}
            Op::Add(a, b) => {
                acc(*a, reduce_to(g.clone(), self.shape(*a)));
                acc(*b, reduce_to(g.clone(), self.shape(*b)));
            }
            Op::Sub(a, b) => {
                acc(*a, reduce_to(g.clone(), self.shape(*a)));
                acc(*b, reduce_to(-g, self.shape(*b)));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.tracked(*a) {
                    acc(*a, reduce_to(g * vb, self.shape(*a)));
                }
                if self.tracked(*b) {
                    acc(*b, reduce_to(g * va, self.shape(*b)));
                }
            }
            Op::Neg(a) => acc(*a, -g),
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::MatMul(a, b) => {
                if self.tracked(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if self.tracked(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    acc(p, g.slice(s![.., at..at + w]).to_owned());
                    at += w;
                }
            }
            Op::SliceCols(a, start) => {
                let sa = self.shape(*a);
                let mut full = Tensor::zeros((sa[0], sa[1]));
                full.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, full);
            }
            Op::GatherRows(a, index) => {
                let sa = self.shape(*a);
                acc(*a, scatter_rows(g, index, sa[0]));
            }
            Op::ScatterAddRows(a, index) => acc(*a, gather_rows(g, index)),
            Op::Relu(a) => {
                let mut out = g.clone();
                Zip::from(&mut out).and(self.value(*a)).for_each(|o, &x| {
                    if x <= 0.0 {
                        *o = 0.0;
                    }
                });
                acc(*a, out);
            }
            Op::Tanh(a) => {
                let mut out = g.clone();
                Zip::from(&mut out).and(&node.value).for_each(|o, &y| *o *= 1.0 - y * y);
                acc(*a, out);
            }
            Op::Exp(a) => acc(*a, g * &node.value),
            Op::Softplus(a) => {
                let mut out = g.clone();
                Zip::from(&mut out).and(self.value(*a)).for_each(|o, &x| *o *= sigmoid(x));
                acc(*a, out);
            }
            Op::Sum(a) => {
                let sa = self.shape(*a);
                acc(*a, Tensor::from_elem((sa[0], sa[1]), g[(0, 0)]));
            }
            Op::Mean(a) => {
                let sa = self.shape(*a);
                let n = (sa[0] * sa[1]).max(1) as f64;
                acc(*a, Tensor::from_elem((sa[0], sa[1]), g[(0, 0)] / n));
            }
            Op::SumCols(a) => {
                let sa = self.shape(*a);
                let mut out = Tensor::zeros((sa[0], sa[1]));
                for (mut row, gi) in out.rows_mut().into_iter().zip(g.iter()) {
                    row.fill(*gi);
                }
                acc(*a, out);
            }
            Op::Norm(a) => {
                let n = node.value[(0, 0)];
                let va = self.value(*a);
                if n > 0.0 {
                    acc(*a, va * (g[(0, 0)] / n));
                } else {
                    acc(*a, Tensor::zeros(va.dim()));
                }
            }
            Op::LayerNorm { src, inv_std } => {
                let y = &node.value;
                let cols = y.ncols() as f64;
                let mut out = Tensor::zeros(y.dim());
                for (r, is) in inv_std.iter().enumerate() {
                    let gy = g.row(r);
                    let yr = y.row(r);
                    let mean_g = gy.sum() / cols;
                    let mean_gy = gy.iter().zip(yr.iter()).map(|(a, b)| a * b).sum::<f64>() / cols;
                    for c in 0..y.ncols() {
                        out[(r, c)] = is * (gy[c] - mean_g - yr[c] * mean_gy);
                    }
                }
                acc(*src, out);
            }
            Op::Custom { inputs, op } => {
                let vals: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                let contribs = op.vjp(&vals, &node.value, g);
                debug_assert_eq!(contribs.len(), inputs.len(), "{} returned wrong arity", op.name());
                for (&v, c) in inputs.iter().zip(contribs) {
                    if let Some(c) = c {
                        acc(v, c);
                    }
                }
            }
        }
    }
}

fn gather_rows(src: &Tensor, index: &[usize]) -> Tensor {
    let mut out = Tensor::zeros((index.len(), src.ncols()));
    for (k, &i) in index.iter().enumerate() {
        out.row_mut(k).assign(&src.row(i));
    }
    out
}

fn scatter_rows(src: &Tensor, index: &[usize], rows: usize) -> Tensor {
    let mut out = Tensor::zeros((rows, src.ncols()));
    for (k, &i) in index.iter().enumerate() {
        let mut dst = out.row_mut(i);
        dst += &src.row(k);
    }
    out
}

/// Result of a reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<[usize; 2]>,
    leaves: Vec<usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when the loss does
    /// not depend on it.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => {
                let [r, c] = self.shapes[v.0];
                Tensor::zeros((r, c))
            }
        }
    }

    pub fn get_ref(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Pairs every leaf with its gradient, in creation order.
    pub fn leaves(&self) -> impl Iterator<Item = (Var, Tensor)> + '_ {
        self.leaves.iter().map(|&i| (Var(i), self.get(Var(i))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn relu_subgradient_convention() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[-1.0, 0.0, 1.0]]);
        let y = tape.relu(x);
        let l = tape.sum(y);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(x), array![[0.0, 0.0, 1.0]]);
    }

    #[test]
    fn matmul_gradient_shapes() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::ones((2, 3)));
        let b = tape.leaf(Tensor::ones((3, 4)));
        let c = tape.matmul(a, b).unwrap();
        let l = tape.sum(c);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(a).dim(), (2, 3));
        assert_eq!(g.get(b).dim(), (3, 4));
        assert_eq!(g.get(a), Tensor::from_elem((2, 3), 4.0));
    }

    #[test]
    fn sum_gives_ones() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[1.0], [2.0], [3.0], [4.0], [5.0]]);
        let l = tape.sum(x);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(x), Tensor::ones((5, 1)));
    }

    #[test]
    fn squared_norm_gives_2x() {
        let mut tape = Tape::new();
        let xv = array![[1.5, -2.0, 0.25]];
        let x = tape.leaf(xv.clone());
        let sq = tape.mul(x, x).unwrap();
        let l = tape.sum(sq);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(x), xv * 2.0);
    }

    #[test]
    fn shape_mismatch_names_op() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::ones((2, 3)));
        let b = tape.leaf(Tensor::ones((2, 3)));
        let err = tape.matmul(a, b).unwrap_err();
        assert_eq!(err, TapeError::Shape { op: "matmul", lhs: [2, 3], rhs: [2, 3] });
        let c = tape.leaf(Tensor::ones((4, 3)));
        assert!(matches!(tape.add(a, c), Err(TapeError::Shape { op: "add", .. })));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::ones((2, 3)));
        assert_eq!(tape.backward(a).unwrap_err(), TapeError::NonScalarLoss { shape: [2, 3] });
    }

    #[test]
    fn untouched_leaf_gets_zero() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::ones((2, 2)));
        let b = tape.leaf(Tensor::ones((3, 1)));
        let l = tape.sum(a);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(b), Tensor::zeros((3, 1)));
        assert_eq!(g.leaves().count(), 2);
    }

    #[test]
    fn stop_gradient_cuts_edge() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[2.0]]);
        let frozen = tape.stop_gradient(x);
        let y = tape.mul(x, frozen).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x), array![[2.0]]);
    }

    #[test]
    fn broadcast_reduces_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::ones((4, 3)));
        let row = tape.leaf(array![[1.0, 2.0, 3.0]]);
        let col = tape.leaf(Tensor::ones((4, 1)));
        let s = tape.leaf(array![[2.0]]);
        let a = tape.mul(x, row).unwrap();
        let b = tape.add(a, col).unwrap();
        let c = tape.mul(b, s).unwrap();
        let l = tape.sum(c);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(row), array![[8.0, 8.0, 8.0]]);
        assert_eq!(g.get(col), Tensor::from_elem((4, 1), 6.0));
        assert_eq!(g.get(s), array![[36.0]]);
    }
}
