use std::sync::Arc;

use super::dense::{gemm, Tensor};
use super::sparse::SparseOp;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulScalar(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    Sparse(Arc<SparseOp>, Var),
    Cheb(Arc<SparseOp>, Var, usize),
    Relu(Var),
    Softplus(Var),
    Sum(Var),
    Norm(Var),
    Flatten(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gather(Var, Arc<[usize]>),
    Scatter(Vec<(Var, Arc<[usize]>)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Linear record of a computation, replayed in reverse to obtain gradients.
///
/// A tape is built once per loss evaluation. Nodes are appended in
/// evaluation order so every input precedes its consumers.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Records a differentiable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a constant; constants never receive gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    fn zip_with(&mut self, op: Op, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let ta = self.value(a);
        let tb = self.value(b);
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_flag(&[a, b]);
        Ok(self.push(value, op, g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(Op::Add(a, b), a, b, "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(Op::Sub(a, b), a, b, "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with(Op::Mul(a, b), a, b, "mul", |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        let g = self.grad_flag(&[a]);
        self.push(value, Op::Scale(a, factor), g)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Multiplies every entry of `a` by the one-element tensor `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let ts = self.value(s);
        if ts.len() != 1 {
            return Err(shape_err("mul_scalar", self.value(a), ts));
        }
        let k = ts.item();
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * k).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_flag(&[a, s]);
        Ok(self.push(value, Op::MulScalar(a, s), g))
    }

    /// Adds the row vector `b` (length = columns of `a`) to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let cols = ta.cols();
        if tb.len() != cols {
            return Err(shape_err("add_row", ta, tb));
        }
        let mut data = ta.data().to_vec();
        for row in data.chunks_mut(cols) {
            for (x, y) in row.iter_mut().zip(tb.data()) {
                *x += y;
            }
        }
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let g = self.grad_flag(&[a, b]);
        Ok(self.push(value, Op::AddRow(a, b), g))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = (ta.rows(), ta.cols());
        let (k2, n) = (tb.rows(), tb.cols());
        if k != k2 {
            return Err(shape_err("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, 0.0);
        let value = Tensor::new(vec![m, n], out)?;
        let g = self.grad_flag(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), g))
    }

    /// Product of a constant sparse operator with `x`.
    pub fn sparse_mul(&mut self, op: &Arc<SparseOp>, x: Var) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows() != op.ncols() {
            return Err(Error::Shape {
                op: "sparse_mul",
                lhs: vec![op.nrows(), op.ncols()],
                rhs: tx.shape().to_vec(),
            });
        }
        let width = tx.cols();
        let data = op.matrix().mul_dense(tx.data(), width);
        let shape = if tx.shape().len() == 1 {
            vec![op.nrows()]
        } else {
            vec![op.nrows(), width]
        };
        let value = Tensor::new(shape, data)?;
        let g = self.grad_flag(&[x]);
        Ok(self.push(value, Op::Sparse(op.clone(), x), g))
    }

    /// Chebyshev basis `[T_0(L) X | T_1(L) X | ... | T_{K-1}(L) X]` stacked
    /// column-block-wise, computed with the three-term recursion.
    pub fn cheb_basis(&mut self, lhat: &Arc<SparseOp>, x: Var, order: usize) -> Result<Var> {
        if order < 1 {
            return Err(Error::Config("Chebyshev order must be at least 1".into()));
        }
        let tx = self.value(x);
        let n = tx.rows();
        if lhat.nrows() != n || lhat.ncols() != n {
            return Err(Error::Shape {
                op: "cheb_basis",
                lhs: vec![lhat.nrows(), lhat.ncols()],
                rhs: tx.shape().to_vec(),
            });
        }
        let f = tx.cols();
        let blocks = chebyshev_blocks(lhat.matrix(), tx.data(), n, f, order);
        let value = Tensor::new(vec![n, order * f], interleave_blocks(&blocks, n, f))?;
        let g = self.grad_flag(&[x]);
        Ok(self.push(value, Op::Cheb(lhat.clone(), x, order), g))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        let g = self.grad_flag(&[a]);
        self.push(value, Op::Relu(a), g)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| softplus(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        let g = self.grad_flag(&[a]);
        self.push(value, Op::Softplus(a), g)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let g = self.grad_flag(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), g)
    }

    /// Same values viewed as a rank-1 tensor.
    pub fn flatten(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let value = Tensor::vector(ta.data().to_vec());
        let g = self.grad_flag(&[a]);
        self.push(value, Op::Flatten(a), g)
    }

    /// Euclidean norm of all entries. At the origin the value is zero and the
    /// gradient is taken to be zero.
    pub fn l2_norm(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().map(|x| x * x).sum::<f64>().sqrt();
        let g = self.grad_flag(&[a]);
        self.push(Tensor::scalar(s), Op::Norm(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Config("concat of nothing".into()))?;
        let rows = self.value(*first).rows();
        let mut total = 0;
        for p in parts {
            let t = self.value(*p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(*first), t));
            }
            total += t.cols();
        }
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for p in parts {
            let t = self.value(*p);
            let c = t.cols();
            for r in 0..rows {
                data[r * total + offset..r * total + offset + c].copy_from_slice(&t.data()[r * c..(r + 1) * c]);
            }
            offset += c;
        }
        let value = Tensor::new(vec![rows, total], data)?;
        let g = self.grad_flag(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), g))
    }

    /// Stacks tensors along the first axis. All parts must agree in width;
    /// rank-1 parts give a rank-1 result.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Config("concat of nothing".into()))?;
        let t0 = self.value(*first);
        let rank = t0.shape().len();
        let cols = t0.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = self.value(*p);
            if t.shape().len() != rank || t.cols() != cols {
                return Err(shape_err("concat_rows", self.value(*first), t));
            }
            data.extend_from_slice(t.data());
            rows += t.rows();
        }
        let shape = if rank == 1 { vec![rows] } else { vec![rows, cols] };
        let value = Tensor::new(shape, data)?;
        let g = self.grad_flag(parts);
        Ok(self.push(value, Op::ConcatRows(parts.to_vec()), g))
    }

    /// Selects rows of `a` by index (entries, for vectors).
    pub fn gather(&mut self, a: Var, index: impl Into<Arc<[usize]>>) -> Result<Var> {
        let index: Arc<[usize]> = index.into();
        let ta = self.value(a);
        let (rows, cols) = (ta.rows(), ta.cols());
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index.iter() {
            if i >= rows {
                return Err(Error::Shape {
                    op: "gather",
                    lhs: ta.shape().to_vec(),
                    rhs: vec![i],
                });
            }
            data.extend_from_slice(&ta.data()[i * cols..(i + 1) * cols]);
        }
        let shape = if ta.shape().len() == 1 {
            vec![index.len()]
        } else {
            vec![index.len(), cols]
        };
        let value = Tensor::new(shape, data)?;
        let g = self.grad_flag(&[a]);
        Ok(self.push(value, Op::Gather(a, index), g))
    }

    /// Builds a fresh vector of length `len` whose entries at `index` are
    /// taken from the corresponding part. Unassigned entries are zero and each
    /// target may be written at most once.
    pub fn scatter(&mut self, len: usize, parts: Vec<(Var, Arc<[usize]>)>) -> Result<Var> {
        let mut data = vec![0.0; len];
        let mut written = vec![false; len];
        for (v, index) in &parts {
            let t = self.value(*v);
            if t.len() != index.len() {
                return Err(Error::Shape {
                    op: "scatter",
                    lhs: t.shape().to_vec(),
                    rhs: vec![index.len()],
                });
            }
            for (&i, &x) in index.iter().zip(t.data()) {
                if i >= len || written[i] {
                    return Err(Error::Config(format!("scatter target {i} out of range or written twice")));
                }
                written[i] = true;
                data[i] = x;
            }
        }
        let vars: Vec<Var> = parts.iter().map(|(v, _)| *v).collect();
        let g = self.grad_flag(&vars);
        Ok(self.push(Tensor::vector(data), Op::Scatter(parts), g))
    }

    /// Reverse sweep from the scalar `loss`. Returns the gradient with respect
    /// to each entry of `wrt`; inputs that the loss does not depend on get
    /// zeros.
    pub fn backward(&self, loss: Var, wrt: &[Var]) -> Result<Vec<Tensor>> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(Error::Shape {
                op: "backward (loss must be scalar)",
                lhs: lt.shape().to_vec(),
                rhs: vec![1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }

        Ok(wrt
            .iter()
            .map(|v| {
                let shape = self.value(*v).shape().to_vec();
                let data = grads
                    .get(v.0)
                    .and_then(|g| g.clone())
                    .unwrap_or_else(|| vec![0.0; self.value(*v).len()]);
                Tensor::new(shape, data).expect("gradient shape")
            })
            .collect())
    }

    fn buf<'a>(&self, grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for (v, sign) in [(*a, 1.0), (*b, 1.0)] {
                    if let Some(buf) = self.buf(grads, v) {
                        buf.iter_mut().zip(g).for_each(|(d, x)| *d += sign * x);
                    }
                }
            }
            Op::Sub(a, b) => {
                for (v, sign) in [(*a, 1.0), (*b, -1.0)] {
                    if let Some(buf) = self.buf(grads, v) {
                        buf.iter_mut().zip(g).for_each(|(d, x)| *d += sign * x);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if let Some(buf) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        buf[i] += g[i] * vb[i];
                    }
                }
                if let Some(buf) = self.buf(grads, *b) {
                    for i in 0..g.len() {
                        buf[i] += g[i] * va[i];
                    }
                }
            }
            Op::Scale(a, k) => {
                if let Some(buf) = self.buf(grads, *a) {
                    buf.iter_mut().zip(g).for_each(|(d, x)| *d += k * x);
                }
            }
            Op::MulScalar(a, s) => {
                let k = self.value(*s).item();
                let va = self.value(*a).data();
                if let Some(buf) = self.buf(grads, *a) {
                    buf.iter_mut().zip(g).for_each(|(d, x)| *d += k * x);
                }
                if let Some(buf) = self.buf(grads, *s) {
                    buf[0] += g.iter().zip(va).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            Op::AddRow(a, b) => {
                if let Some(buf) = self.buf(grads, *a) {
                    buf.iter_mut().zip(g).for_each(|(d, x)| *d += x);
                }
                let cols = self.value(*a).cols();
                if let Some(buf) = self.buf(grads, *b) {
                    for row in g.chunks(cols) {
                        buf.iter_mut().zip(row).for_each(|(d, x)| *d += x);
                    }
                }
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(buf) = self.buf(grads, *a) {
                    gemm(m, n, k, g, false, tb.data(), true, buf, 1.0);
                }
                if let Some(buf) = self.buf(grads, *b) {
                    gemm(k, m, n, ta.data(), true, g, false, buf, 1.0);
                }
            }
            Op::Sparse(op, x) => {
                let width = self.value(*x).cols();
                if let Some(buf) = self.buf(grads, *x) {
                    op.adjoint().mul_dense_into(g, width, buf, true);
                }
            }
            Op::Cheb(lhat, x, order) => {
                let tx = self.value(*x);
                let (n, f) = (tx.rows(), tx.cols());
                if let Some(buf) = self.buf(grads, *x) {
                    let blocks = split_blocks(g, n, f, *order);
                    let sum = clenshaw_adjoint(lhat.adjoint(), &blocks, n, f);
                    buf.iter_mut().zip(&sum).for_each(|(d, x)| *d += x);
                }
            }
            Op::Relu(a) => {
                let va = self.value(*a).data();
                if let Some(buf) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        if va[i] > 0.0 {
                            buf[i] += g[i];
                        }
                    }
                }
            }
            Op::Softplus(a) => {
                let va = self.value(*a).data();
                if let Some(buf) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        buf[i] += g[i] * sigmoid(va[i]);
                    }
                }
            }
            Op::Flatten(a) => {
                if let Some(buf) = self.buf(grads, *a) {
                    buf.iter_mut().zip(g).for_each(|(d, x)| *d += x);
                }
            }
            Op::Sum(a) => {
                if let Some(buf) = self.buf(grads, *a) {
                    buf.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Norm(a) => {
                let norm = node.value.item();
                let va = self.value(*a).data();
                if norm > 0.0 {
                    if let Some(buf) = self.buf(grads, *a) {
                        let k = g[0] / norm;
                        buf.iter_mut().zip(va).for_each(|(d, x)| *d += k * x);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let rows = node.value.rows();
                let mut offset = 0;
                for p in parts {
                    let c = self.value(*p).cols();
                    if let Some(buf) = self.buf(grads, *p) {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + c];
                            buf[r * c..(r + 1) * c].iter_mut().zip(src).for_each(|(d, x)| *d += x);
                        }
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    if let Some(buf) = self.buf(grads, *p) {
                        buf.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, x)| *d += x);
                    }
                    offset += len;
                }
            }
            Op::Gather(a, index) => {
                let cols = self.value(*a).cols();
                if let Some(buf) = self.buf(grads, *a) {
                    for (k, &i) in index.iter().enumerate() {
                        for c in 0..cols {
                            buf[i * cols + c] += g[k * cols + c];
                        }
                    }
                }
            }
            Op::Scatter(parts) => {
                for (v, index) in parts {
                    if let Some(buf) = self.buf(grads, *v) {
                        for (k, &i) in index.iter().enumerate() {
                            buf[k] += g[i];
                        }
                    }
                }
            }
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for positive arguments.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn chebyshev_blocks(lhat: &super::sparse::CsrMatrix, x: &[f64], n: usize, f: usize, order: usize) -> Vec<Vec<f64>> {
    let mut blocks: Vec<Vec<f64>> = Vec::with_capacity(order);
    blocks.push(x.to_vec());
    if order > 1 {
        blocks.push(lhat.mul_dense(x, f));
    }
    for k in 2..order {
        let mut next = lhat.mul_dense(&blocks[k - 1], f);
        for (z, prev) in next.iter_mut().zip(&blocks[k - 2]) {
            *z = 2.0 * *z - prev;
        }
        blocks.push(next);
    }
    debug_assert!(blocks.iter().all(|b| b.len() == n * f));
    blocks
}

fn interleave_blocks(blocks: &[Vec<f64>], n: usize, f: usize) -> Vec<f64> {
    let width = blocks.len() * f;
    let mut out = vec![0.0; n * width];
    for (k, b) in blocks.iter().enumerate() {
        for r in 0..n {
            out[r * width + k * f..r * width + (k + 1) * f].copy_from_slice(&b[r * f..(r + 1) * f]);
        }
    }
    out
}

fn split_blocks(g: &[f64], n: usize, f: usize, order: usize) -> Vec<Vec<f64>> {
    let width = order * f;
    (0..order)
        .map(|k| {
            let mut b = vec![0.0; n * f];
            for r in 0..n {
                b[r * f..(r + 1) * f].copy_from_slice(&g[r * width + k * f..r * width + (k + 1) * f]);
            }
            b
        })
        .collect()
}

/// `sum_k T_k(L)^T G_k` by Clenshaw's recurrence on the transposed operator.
fn clenshaw_adjoint(lt: &super::sparse::CsrMatrix, g: &[Vec<f64>], n: usize, f: usize) -> Vec<f64> {
    let order = g.len();
    if order == 1 {
        return g[0].clone();
    }
    let mut b1 = vec![0.0; n * f]; // b_{k+1}
    let mut b2 = vec![0.0; n * f]; // b_{k+2}
    for k in (1..order).rev() {
        let mut bk = lt.mul_dense(&b1, f);
        for i in 0..n * f {
            bk[i] = g[k][i] + 2.0 * bk[i] - b2[i];
        }
        b2 = std::mem::replace(&mut b1, bk);
    }
    let mut out = lt.mul_dense(&b1, f);
    for i in 0..n * f {
        out[i] += g[0][i] - b2[i];
    }
    out
}
