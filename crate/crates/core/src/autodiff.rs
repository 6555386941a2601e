//! Minimal reverse-mode automatic differentiation over dense f64 matrices,
//! plus the layers (MLP, GCN, masked softmax) and the Adam optimizer the
//! model needs.
//!
//! A [`Tape`] records one forward pass; dependencies are captured
//! dynamically as ops execute, so every subgraph can have its own shape.
//! [`Tape::backward`] sweeps the record once in reverse, so each dependency
//! contributes exactly one gradient term.
//!
//! Shape mismatches are programming errors and panic with both shapes in
//! the message. Reductions accumulate in ascending index order from zero,
//! matching the conventions in [`crate::graph`].

use crate::graph::{matmul_into, DenseMatrix, Graph};
use crate::rng;
use rand_chacha::ChaCha8Rng;
use std::cell::RefCell;
use std::io::{Read, Write};
use std::path::Path;
use std::rc::Rc;

/// Handle to a tensor on a tape: an index plus its shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tensor {
    pub id: usize,
    pub rows: usize,
    pub cols: usize,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    ScalarMul(usize, f64),
    Relu(usize),
    Sigmoid(usize),
    RowMaskedSoftmax { x: usize, adj: Rc<Graph> },
    Trace(usize),
    SelectRows { x: usize, idx: Vec<usize> },
    SelectCols { x: usize, idx: Vec<usize> },
    Transpose(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    AddBiasRow { x: usize, bias: usize },
    MseLoss { pred: usize, targets: Vec<f64> },
    Entry { x: usize, r: usize, c: usize },
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) => vec![*a, *b],
            Op::ScalarMul(x, _)
            | Op::Relu(x)
            | Op::Sigmoid(x)
            | Op::RowMaskedSoftmax { x, .. }
            | Op::Trace(x)
            | Op::SelectRows { x, .. }
            | Op::SelectCols { x, .. }
            | Op::Transpose(x)
            | Op::MseLoss { pred: x, .. }
            | Op::Entry { x, .. } => vec![*x],
            Op::ConcatCols(xs) | Op::ConcatRows(xs) => xs.clone(),
            Op::AddBiasRow { x, bias } => vec![*x, *bias],
        }
    }
}

struct Node {
    value: DenseMatrix,
    op: Op,
    /// False when no differentiable leaf feeds this node; backward
    /// skips such nodes and never spends a kernel on their parents.
    grad_needed: bool,
}

/// Records one forward pass and computes gradients on demand.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

// Rows per tile in the two transposed-operand kernels; a tile of a
// 1240-wide matrix is ~1.2 MB, comfortably inside L2.
const GEMM_BLOCK: usize = 128;

#[inline]
fn dot_lanes<const L: usize>(a: &[f64], b: &[f64]) -> (f64, usize) {
    let mut lanes = [0.0f64; L];
    for (xa, xb) in a.chunks_exact(L).zip(b.chunks_exact(L)) {
        let xa: &[f64; L] = xa.try_into().expect("chunk size");
        let xb: &[f64; L] = xb.try_into().expect("chunk size");
        for l in 0..L {
            lanes[l] = xa[l].mul_add(xb[l], lanes[l]);
        }
    }
    let mut acc = 0.0;
    for l in lanes {
        acc += l;
    }
    (acc, a.len() / L * L)
}

/// Dot product with a summation schedule fixed by the length alone:
/// indices 0 and 1 form a two-term head (bitwise insensitive to their
/// order, which is the only pair a focal-node swap can permute), the
/// rest fill lane accumulators that are reduced in a fixed order. Wide
/// inputs get enough lanes to hide floating-point add latency; narrow
/// ones skip the lane setup cost.
#[inline]
fn dot_pair_head(a: &[f64], b: &[f64]) -> f64 {
    let m = a.len();
    if m == 0 {
        return 0.0;
    }
    if m == 1 {
        return a[0] * b[0];
    }
    let head = a[0] * b[0] + a[1] * b[1];
    let mut ta = &a[2..];
    let mut tb = &b[2..];
    let mut acc = head;
    if m >= 130 {
        let (wide, used) = dot_lanes::<32>(ta, tb);
        acc += wide;
        ta = &ta[used..];
        tb = &tb[used..];
    }
    if m >= 20 {
        let (mid, used) = dot_lanes::<8>(ta, tb);
        acc += mid;
        ta = &ta[used..];
        tb = &tb[used..];
    }
    let mut tail = 0.0;
    for (x, y) in ta.iter().zip(tb) {
        tail = x.mul_add(*y, tail);
    }
    acc + tail
}

// c (r x n) += a (r x m) * b^T where b is (n x m)
fn matmul_nt_into(a: &[f64], r: usize, m: usize, b: &[f64], n: usize, c: &mut [f64]) {
    // b is tiled by rows so each tile is revisited from cache for every
    // row of a; each c entry is still one contiguous dot product.
    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + GEMM_BLOCK).min(n);
        for i in 0..r {
            let a_row = &a[i * m..(i + 1) * m];
            for j in j0..j1 {
                let b_row = &b[j * m..(j + 1) * m];
                c[i * n + j] += dot_pair_head(a_row, b_row);
            }
        }
        j0 = j1;
    }
}

// c (m x n) += a^T * b where a is (r x m), b is (r x n)
fn matmul_tn_into(a: &[f64], r: usize, m: usize, b: &[f64], n: usize, c: &mut [f64]) {
    // c is tiled by rows so one tile absorbs all r rank-1 updates from
    // cache; each c entry still accumulates in ascending k.
    let mut i0 = 0;
    while i0 < m {
        let i1 = (i0 + GEMM_BLOCK).min(m);
        for k in 0..r {
            let b_row = &b[k * n..(k + 1) * n];
            for i in i0..i1 {
                let aki = a[k * m + i];
                if aki == 0.0 {
                    continue;
                }
                let c_row = &mut c[i * n..(i + 1) * n];
                for j in 0..n {
                    c_row[j] += aki * b_row[j];
                }
            }
        }
        i0 = i1;
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: DenseMatrix, op: Op) -> Tensor {
        let mut nodes = self.nodes.borrow_mut();
        let grad_needed = match &op {
            Op::Leaf => true,
            other => other.parents().iter().any(|&p| nodes[p].grad_needed),
        };
        let id = nodes.len();
        let rows = value.rows();
        let cols = value.cols();
        nodes.push(Node { value, op, grad_needed });
        Tensor { id, rows, cols }
    }

    /// Enters a matrix as a differentiable leaf.
    pub fn leaf(&self, value: DenseMatrix) -> Tensor {
        self.push(value, Op::Leaf)
    }

    /// Enters a matrix that never receives a gradient. Backward prunes
    /// every kernel whose only purpose would be filling its gradient.
    pub fn constant(&self, value: DenseMatrix) -> Tensor {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        let rows = value.rows();
        let cols = value.cols();
        nodes.push(Node { value, op: Op::Leaf, grad_needed: false });
        Tensor { id, rows, cols }
    }

    /// Clone of the forward value of `t`.
    pub fn value(&self, t: Tensor) -> DenseMatrix {
        self.nodes.borrow()[t.id].value.clone()
    }

    /// Single forward entry of `t`.
    pub fn get(&self, t: Tensor, r: usize, c: usize) -> f64 {
        self.nodes.borrow()[t.id].value.get(r, c)
    }

    pub fn matmul(&self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(
            a.cols, b.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            a.rows, a.cols, b.rows, b.cols
        );
        let nodes = self.nodes.borrow();
        let mut out = DenseMatrix::zeros(a.rows, b.cols);
        matmul_into(
            nodes[a.id].value.data(),
            a.rows,
            a.cols,
            nodes[b.id].value.data(),
            b.cols,
            out.data_mut(),
        );
        drop(nodes);
        self.push(out, Op::MatMul(a.id, b.id))
    }

    pub fn add(&self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(
            (a.rows, a.cols),
            (b.rows, b.cols),
            "add shape mismatch: {}x{} vs {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        );
        let nodes = self.nodes.borrow();
        let mut out = nodes[a.id].value.clone();
        for (o, &x) in out.data_mut().iter_mut().zip(nodes[b.id].value.data()) {
            *o += x;
        }
        drop(nodes);
        self.push(out, Op::Add(a.id, b.id))
    }

    pub fn sub(&self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(
            (a.rows, a.cols),
            (b.rows, b.cols),
            "sub shape mismatch: {}x{} vs {}x{}",
            a.rows,
            a.cols,
            b.rows,
            b.cols
        );
        let nodes = self.nodes.borrow();
        let mut out = nodes[a.id].value.clone();
        for (o, &x) in out.data_mut().iter_mut().zip(nodes[b.id].value.data()) {
            *o -= x;
        }
        drop(nodes);
        self.push(out, Op::Sub(a.id, b.id))
    }

    pub fn scalar_mul(&self, x: Tensor, c: f64) -> Tensor {
        let nodes = self.nodes.borrow();
        let mut out = nodes[x.id].value.clone();
        for o in out.data_mut() {
            *o *= c;
        }
        drop(nodes);
        self.push(out, Op::ScalarMul(x.id, c))
    }

    /// Elementwise max(x, 0); the derivative at exactly 0 is taken as 0.
    pub fn relu(&self, x: Tensor) -> Tensor {
        let nodes = self.nodes.borrow();
        let mut out = nodes[x.id].value.clone();
        for o in out.data_mut() {
            if *o < 0.0 {
                *o = 0.0;
            }
        }
        drop(nodes);
        self.push(out, Op::Relu(x.id))
    }

    /// Elementwise logistic function, computed in the branch-stable form.
    pub fn sigmoid(&self, x: Tensor) -> Tensor {
        let nodes = self.nodes.borrow();
        let mut out = nodes[x.id].value.clone();
        for o in out.data_mut() {
            *o = stable_sigmoid(*o);
        }
        drop(nodes);
        self.push(out, Op::Sigmoid(x.id))
    }

    /// Per-row softmax over each node's neighbor set: row v of the output
    /// holds softmax(x[v, u] for u in neighbors(v)) at the neighbor
    /// columns and zero elsewhere; rows of isolated nodes are all zero.
    /// The formula is exp(x - rowmax) normalized by the ascending-order
    /// sum over neighbors.
    pub fn row_masked_softmax(&self, x: Tensor, adj: &Graph) -> Tensor {
        assert_eq!(
            x.rows,
            adj.num_nodes(),
            "softmax rows {} must match node count {}",
            x.rows,
            adj.num_nodes()
        );
        assert_eq!(x.rows, x.cols, "masked softmax expects a square score matrix");
        let adj = Rc::new(adj.clone());
        let nodes = self.nodes.borrow();
        let xv = &nodes[x.id].value;
        let n = x.rows;
        let mut out = DenseMatrix::zeros(n, n);
        for v in 0..n {
            let nbrs = adj.neighbors(v);
            if nbrs.is_empty() {
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            for &u in nbrs {
                max = max.max(xv.get(v, u));
            }
            let mut total = 0.0;
            for &u in nbrs {
                let e = (xv.get(v, u) - max).exp();
                out.set(v, u, e);
                total += e;
            }
            for &u in nbrs {
                out.set(v, u, out.get(v, u) / total);
            }
        }
        drop(nodes);
        self.push(out, Op::RowMaskedSoftmax { x: x.id, adj })
    }

    /// Trace of a square tensor as a 1x1 tensor.
    pub fn trace(&self, x: Tensor) -> Tensor {
        assert_eq!(x.rows, x.cols, "trace expects square, got {}x{}", x.rows, x.cols);
        let t = self.nodes.borrow()[x.id].value.trace();
        self.push(DenseMatrix::from_vec(1, 1, vec![t]), Op::Trace(x.id))
    }

    /// Gathers rows in the given order.
    pub fn select_rows(&self, x: Tensor, idx: &[usize]) -> Tensor {
        let nodes = self.nodes.borrow();
        let xv = &nodes[x.id].value;
        let mut out = DenseMatrix::zeros(idx.len(), x.cols);
        for (i, &r) in idx.iter().enumerate() {
            out.row_mut(i).copy_from_slice(xv.row(r));
        }
        drop(nodes);
        self.push(
            out,
            Op::SelectRows {
                x: x.id,
                idx: idx.to_vec(),
            },
        )
    }

    /// Gathers columns in the given order.
    pub fn select_cols(&self, x: Tensor, idx: &[usize]) -> Tensor {
        let nodes = self.nodes.borrow();
        let xv = &nodes[x.id].value;
        let mut out = DenseMatrix::zeros(x.rows, idx.len());
        for r in 0..x.rows {
            for (j, &c) in idx.iter().enumerate() {
                out.set(r, j, xv.get(r, c));
            }
        }
        drop(nodes);
        self.push(
            out,
            Op::SelectCols {
                x: x.id,
                idx: idx.to_vec(),
            },
        )
    }

    pub fn transpose(&self, x: Tensor) -> Tensor {
        let out = self.nodes.borrow()[x.id].value.transpose();
        self.push(out, Op::Transpose(x.id))
    }

    /// Horizontal concatenation; all parts must share the row count.
    pub fn concat_cols(&self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat_cols needs at least one part");
        let rows = parts[0].rows;
        let total: usize = parts.iter().map(|p| p.cols).sum();
        for p in parts {
            assert_eq!(
                p.rows, rows,
                "concat_cols row mismatch: {}x{} vs {} rows",
                p.rows, p.cols, rows
            );
        }
        let nodes = self.nodes.borrow();
        let mut out = DenseMatrix::zeros(rows, total);
        let mut col0 = 0;
        for p in parts {
            let pv = &nodes[p.id].value;
            for r in 0..rows {
                out.row_mut(r)[col0..col0 + p.cols].copy_from_slice(pv.row(r));
            }
            col0 += p.cols;
        }
        drop(nodes);
        self.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect()))
    }

    /// Vertical stacking; all parts must share the column count.
    pub fn concat_rows(&self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "concat_rows needs at least one part");
        let cols = parts[0].cols;
        let total: usize = parts.iter().map(|p| p.rows).sum();
        for p in parts {
            assert_eq!(
                p.cols, cols,
                "concat_rows col mismatch: {}x{} vs {} cols",
                p.rows, p.cols, cols
            );
        }
        let nodes = self.nodes.borrow();
        let mut out = DenseMatrix::zeros(total, cols);
        let mut row0 = 0;
        for p in parts {
            let pv = &nodes[p.id].value;
            for r in 0..p.rows {
                out.row_mut(row0 + r).copy_from_slice(pv.row(r));
            }
            row0 += p.rows;
        }
        drop(nodes);
        self.push(out, Op::ConcatRows(parts.iter().map(|p| p.id).collect()))
    }

    /// Adds a 1 x c bias row to every row of x (the only broadcast form).
    pub fn add_bias_row(&self, x: Tensor, bias: Tensor) -> Tensor {
        assert_eq!(bias.rows, 1, "bias must be a single row");
        assert_eq!(
            bias.cols, x.cols,
            "bias width {} must match x width {}",
            bias.cols, x.cols
        );
        let nodes = self.nodes.borrow();
        let mut out = nodes[x.id].value.clone();
        let b = nodes[bias.id].value.row(0).to_vec();
        for r in 0..x.rows {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(&b) {
                *o += bv;
            }
        }
        drop(nodes);
        self.push(
            out,
            Op::AddBiasRow {
                x: x.id,
                bias: bias.id,
            },
        )
    }

    /// Mean squared error between an n x 1 prediction column and targets.
    pub fn mse_loss(&self, pred: Tensor, targets: &[f64]) -> Tensor {
        assert_eq!(pred.cols, 1, "mse_loss expects an n x 1 prediction column");
        assert_eq!(
            pred.rows,
            targets.len(),
            "mse_loss got {} predictions vs {} targets",
            pred.rows,
            targets.len()
        );
        let nodes = self.nodes.borrow();
        let pv = &nodes[pred.id].value;
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let d = pv.get(i, 0) - t;
            total += d * d;
        }
        let loss = total / targets.len() as f64;
        drop(nodes);
        self.push(
            DenseMatrix::from_vec(1, 1, vec![loss]),
            Op::MseLoss {
                pred: pred.id,
                targets: targets.to_vec(),
            },
        )
    }

    /// Single entry as a 1x1 tensor.
    pub fn entry(&self, x: Tensor, r: usize, c: usize) -> Tensor {
        let v = self.get(x, r, c);
        self.push(
            DenseMatrix::from_vec(1, 1, vec![v]),
            Op::Entry { x: x.id, r, c },
        )
    }

    /// Reverse sweep from a scalar output; returns per-node gradients.
    /// Call [`Tape::grad`] afterwards to read them.
    pub fn backward(&self, output: Tensor) -> Gradients {
        assert_eq!(
            (output.rows, output.cols),
            (1, 1),
            "backward starts from a scalar, got {}x{}",
            output.rows,
            output.cols
        );
        self.backward_seeded(output, DenseMatrix::from_vec(1, 1, vec![1.0]))
    }

    /// Reverse sweep with an explicit seed gradient for `output` (used to
    /// chain a downstream tape's gradient into this one).
    pub fn backward_seeded(&self, output: Tensor, seed: DenseMatrix) -> Gradients {
        assert_eq!(
            (seed.rows(), seed.cols()),
            (output.rows, output.cols),
            "seed shape {}x{} must match output {}x{}",
            seed.rows(),
            seed.cols(),
            output.rows,
            output.cols
        );
        let nodes = self.nodes.borrow();
        let mut grads: Vec<DenseMatrix> = nodes
            .iter()
            .map(|n| DenseMatrix::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[output.id] = seed;
        for i in (0..nodes.len()).rev() {
            let node = &nodes[i];
            if !node.grad_needed {
                continue;
            }
            let (before, rest) = grads.split_at_mut(i);
            let g = &rest[0];
            if g.data().iter().all(|&x| x == 0.0) {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].grad_needed {
                        // ga += g * b^T
                        matmul_nt_into(
                            g.data(),
                            g.rows(),
                            g.cols(),
                            bv.data(),
                            bv.rows(),
                            before[*a].data_mut(),
                        );
                    }
                    if nodes[*b].grad_needed {
                        // gb += a^T * g
                        matmul_tn_into(
                            av.data(),
                            av.rows(),
                            av.cols(),
                            g.data(),
                            g.cols(),
                            before[*b].data_mut(),
                        );
                    }
                }
                Op::Add(a, b) => {
                    if nodes[*a].grad_needed {
                        for (o, &x) in before[*a].data_mut().iter_mut().zip(g.data()) {
                            *o += x;
                        }
                    }
                    if nodes[*b].grad_needed {
                        for (o, &x) in before[*b].data_mut().iter_mut().zip(g.data()) {
                            *o += x;
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if nodes[*a].grad_needed {
                        for (o, &x) in before[*a].data_mut().iter_mut().zip(g.data()) {
                            *o += x;
                        }
                    }
                    if nodes[*b].grad_needed {
                        for (o, &x) in before[*b].data_mut().iter_mut().zip(g.data()) {
                            *o -= x;
                        }
                    }
                }
                Op::ScalarMul(x, c) => {
                    for (o, &gx) in before[*x].data_mut().iter_mut().zip(g.data()) {
                        *o += c * gx;
                    }
                }
                Op::Relu(x) => {
                    let xv = &nodes[*x].value;
                    for ((o, &gx), &inp) in before[*x]
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(xv.data())
                    {
                        if inp > 0.0 {
                            *o += gx;
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let sv = &node.value;
                    for ((o, &gx), &s) in before[*x]
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(sv.data())
                    {
                        *o += gx * s * (1.0 - s);
                    }
                }
                Op::RowMaskedSoftmax { x, adj } => {
                    let pv = &node.value;
                    let gx = before[*x].data_mut();
                    let n = pv.rows();
                    for v in 0..n {
                        let nbrs = adj.neighbors(v);
                        if nbrs.is_empty() {
                            continue;
                        }
                        let mut dot = 0.0;
                        for &u in nbrs {
                            dot += g.get(v, u) * pv.get(v, u);
                        }
                        for &u in nbrs {
                            gx[v * n + u] += pv.get(v, u) * (g.get(v, u) - dot);
                        }
                    }
                }
                Op::Trace(x) => {
                    let gs = g.get(0, 0);
                    let xg = before[*x].data_mut();
                    let n = nodes[*x].value.rows();
                    for d in 0..n {
                        xg[d * n + d] += gs;
                    }
                }
                Op::SelectRows { x, idx } => {
                    let cols = node.value.cols();
                    let xg = before[*x].data_mut();
                    for (i, &r) in idx.iter().enumerate() {
                        for c in 0..cols {
                            xg[r * cols + c] += g.get(i, c);
                        }
                    }
                }
                Op::SelectCols { x, idx } => {
                    let src_cols = nodes[*x].value.cols();
                    let xg = before[*x].data_mut();
                    for r in 0..node.value.rows() {
                        for (j, &c) in idx.iter().enumerate() {
                            xg[r * src_cols + c] += g.get(r, j);
                        }
                    }
                }
                Op::Transpose(x) => {
                    let xg = before[*x].data_mut();
                    let (r, c) = (node.value.rows(), node.value.cols());
                    for i in 0..r {
                        for j in 0..c {
                            // output (i, j) came from input (j, i)
                            xg[j * r + i] += g.get(i, j);
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut col0 = 0;
                    for &p in parts {
                        let pc = nodes[p].value.cols();
                        if nodes[p].grad_needed {
                            let pg = before[p].data_mut();
                            for r in 0..node.value.rows() {
                                for c in 0..pc {
                                    pg[r * pc + c] += g.get(r, col0 + c);
                                }
                            }
                        }
                        col0 += pc;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut row0 = 0;
                    let cols = node.value.cols();
                    for &p in parts {
                        let pr = nodes[p].value.rows();
                        if nodes[p].grad_needed {
                            let pg = before[p].data_mut();
                            for r in 0..pr {
                                for c in 0..cols {
                                    pg[r * cols + c] += g.get(row0 + r, c);
                                }
                            }
                        }
                        row0 += pr;
                    }
                }
                Op::AddBiasRow { x, bias } => {
                    if nodes[*x].grad_needed {
                        for (o, &gx) in before[*x].data_mut().iter_mut().zip(g.data()) {
                            *o += gx;
                        }
                    }
                    if nodes[*bias].grad_needed {
                        let cols = node.value.cols();
                        let bg = before[*bias].data_mut();
                        for r in 0..node.value.rows() {
                            for c in 0..cols {
                                bg[c] += g.get(r, c);
                            }
                        }
                    }
                }
                Op::MseLoss { pred, targets } => {
                    let gs = g.get(0, 0);
                    let pv = &nodes[*pred].value;
                    let pg = before[*pred].data_mut();
                    let n = targets.len() as f64;
                    for (i, &t) in targets.iter().enumerate() {
                        pg[i] += gs * 2.0 * (pv.get(i, 0) - t) / n;
                    }
                }
                Op::Entry { x, r, c } => {
                    let cols = nodes[*x].value.cols();
                    before[*x].data_mut()[r * cols + c] += g.get(0, 0);
                }
            }
        }
        Gradients { grads }
    }
}

/// Gradient buffers from one backward sweep, indexed by tensor id.
pub struct Gradients {
    grads: Vec<DenseMatrix>,
}

impl Gradients {
    pub fn of(&self, t: Tensor) -> &DenseMatrix {
        &self.grads[t.id]
    }
}

/// One GCN layer: relu(D^-1/2 (A + I) D^-1/2 * z * w), with the
/// self-loop-augmented degrees in D. Differentiable in z and w.
pub fn gcn_layer(tape: &Tape, adj: &Graph, z: Tensor, w: Tensor) -> Tensor {
    let a_hat = tape.constant(normalized_adjacency(adj));
    gcn_layer_pre(tape, a_hat, z, w)
}

/// [`gcn_layer`] with the normalized adjacency already on the tape, so
/// stacked layers share one copy.
pub fn gcn_layer_pre(tape: &Tape, a_hat: Tensor, z: Tensor, w: Tensor) -> Tensor {
    assert_eq!(
        z.rows, a_hat.rows,
        "gcn z rows {} must equal node count {}",
        z.rows, a_hat.rows
    );
    let mixed = tape.matmul(a_hat, z);
    let projected = tape.matmul(mixed, w);
    tape.relu(projected)
}

/// Dense D^-1/2 (A + I) D^-1/2 for a subgraph-sized adjacency.
pub fn normalized_adjacency(adj: &Graph) -> DenseMatrix {
    let n = adj.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((adj.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut out = DenseMatrix::zeros(n, n);
    for v in 0..n {
        out.set(v, v, inv_sqrt[v] * inv_sqrt[v]);
        for &u in adj.neighbors(v) {
            out.set(v, u, inv_sqrt[v] * inv_sqrt[u]);
        }
    }
    out
}

/// Feed-forward MLP: affine layers with relu between them, final layer
/// affine. `weights` pairs each weight matrix with a 1 x out bias row.
pub fn mlp_forward(tape: &Tape, weights: &[(Tensor, Tensor)], x: Tensor) -> Tensor {
    assert!(!weights.is_empty(), "mlp needs at least one layer");
    let mut cur = x;
    for (i, &(w, b)) in weights.iter().enumerate() {
        cur = tape.add_bias_row(tape.matmul(cur, w), b);
        if i + 1 < weights.len() {
            cur = tape.relu(cur);
        }
    }
    cur
}

/// Optimizer state: first/second moment buffers and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(params: &[DenseMatrix]) -> AdamState {
        AdamState {
            step: 0,
            m: params
                .iter()
                .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
                .collect(),
            v: params
                .iter()
                .map(|p| DenseMatrix::zeros(p.rows(), p.cols()))
                .collect(),
        }
    }
}

/// Standard Adam update with bias correction; weight decay is classic L2
/// folded into the gradient.
pub fn adam_step(
    params: &mut [DenseMatrix],
    grads: &[DenseMatrix],
    state: &mut AdamState,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
    weight_decay: f64,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - betas.0.powi(t);
    let bc2 = 1.0 - betas.1.powi(t);
    for (idx, p) in params.iter_mut().enumerate() {
        let g = &grads[idx];
        let m = state.m[idx].data_mut();
        let v = state.v[idx].data_mut();
        let pd = p.data_mut();
        for i in 0..pd.len() {
            let mut gi = g.data()[i];
            if weight_decay != 0.0 {
                gi += weight_decay * pd[i];
            }
            m[i] = betas.0 * m[i] + (1.0 - betas.0) * gi;
            v[i] = betas.1 * v[i] + (1.0 - betas.1) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            pd[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Result of a finite-difference check.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// (parameter index, flat coordinate) of the worst error.
    pub worst: (usize, usize),
}

/// Central-difference check of `analytic` gradients against `loss`.
/// Checks up to `max_coords_per_param` coordinates per parameter (all of
/// them when the parameter is small), subsampled from a seeded stream.
/// The error at a coordinate is |a - n| / max(|a|, |n|) when that
/// denominator exceeds 1e-8, else the absolute difference.
pub fn grad_check(
    loss: &mut dyn FnMut(&[DenseMatrix]) -> f64,
    params: &[DenseMatrix],
    analytic: &[DenseMatrix],
    step: f64,
    max_coords_per_param: usize,
    seed: u64,
) -> GradCheckReport {
    let mut stream = rng::stream(seed);
    let mut work: Vec<DenseMatrix> = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        worst: (0, 0),
    };
    for (pi, p) in params.iter().enumerate() {
        let len = p.data().len();
        let coords: Vec<usize> = if len <= max_coords_per_param {
            (0..len).collect()
        } else {
            let pool: Vec<usize> = (0..len).collect();
            rng::sample_sorted(&mut stream, &pool, max_coords_per_param)
        };
        for ci in coords {
            let orig = work[pi].data()[ci];
            work[pi].data_mut()[ci] = orig + step;
            let up = loss(&work);
            work[pi].data_mut()[ci] = orig - step;
            let down = loss(&work);
            work[pi].data_mut()[ci] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[pi].data()[ci];
            let denom = a.abs().max(numeric.abs());
            let err = if denom > 1e-8 {
                (a - numeric).abs() / denom
            } else {
                (a - numeric).abs()
            };
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = (pi, ci);
            }
            report.checked += 1;
        }
    }
    report
}

/// Glorot-uniform matrix: entries uniform in [-l, l] with
/// l = sqrt(6 / (rows + cols)), drawn row-major from the stream.
pub fn glorot(rows: usize, cols: usize, stream: &mut ChaCha8Rng) -> DenseMatrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = DenseMatrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = (rng::unit_f64(stream) * 2.0 - 1.0) * limit;
    }
    m
}

/// Weights of one MLP: (weight, bias-row) per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<(DenseMatrix, DenseMatrix)>,
}

impl MlpParams {
    /// Glorot weights, zero biases, for the layer widths in `dims`
    /// (input first, output last).
    pub fn init(dims: &[usize], stream: &mut ChaCha8Rng) -> MlpParams {
        assert!(dims.len() >= 2, "mlp needs input and output dims");
        let layers = dims
            .windows(2)
            .map(|w| (glorot(w[0], w[1], stream), DenseMatrix::zeros(1, w[1])))
            .collect();
        MlpParams { layers }
    }

    /// Mounts the layers onto a tape as leaves.
    pub fn mount(&self, tape: &Tape) -> Vec<(Tensor, Tensor)> {
        self.layers
            .iter()
            .map(|(w, b)| (tape.leaf(w.clone()), tape.leaf(b.clone())))
            .collect()
    }
}

/// All trainable tensors of the link model: the GCN stack, one Q and one K
/// MLP per attention head, and the classifier MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub gcn: Vec<DenseMatrix>,
    pub q_mlps: Vec<MlpParams>,
    pub k_mlps: Vec<MlpParams>,
    pub classifier: MlpParams,
}

impl ModelParams {
    /// Initializes all weights from a single stream in a fixed draw order:
    /// GCN layers, then per head the Q then K MLP, then the classifier.
    pub fn init(
        gcn_dims: &[usize],
        att_dims: &[usize],
        heads: usize,
        classifier_dims: &[usize],
        stream: &mut ChaCha8Rng,
    ) -> ModelParams {
        let gcn = gcn_dims
            .windows(2)
            .map(|w| glorot(w[0], w[1], stream))
            .collect();
        let mut q_mlps = Vec::with_capacity(heads);
        let mut k_mlps = Vec::with_capacity(heads);
        for _ in 0..heads {
            q_mlps.push(MlpParams::init(att_dims, stream));
            k_mlps.push(MlpParams::init(att_dims, stream));
        }
        let classifier = MlpParams::init(classifier_dims, stream);
        ModelParams {
            gcn,
            q_mlps,
            k_mlps,
            classifier,
        }
    }

    /// Stable (name, tensor) listing; the order is the flattening used by
    /// the optimizer and the checkpoint format.
    pub fn named(&self) -> Vec<(String, &DenseMatrix)> {
        let mut out = Vec::new();
        for (i, w) in self.gcn.iter().enumerate() {
            out.push((format!("gcn.{i}"), w));
        }
        for (h, (q, k)) in self.q_mlps.iter().zip(&self.k_mlps).enumerate() {
            for (i, (w, b)) in q.layers.iter().enumerate() {
                out.push((format!("head{h}.q.{i}.w"), w));
                out.push((format!("head{h}.q.{i}.b"), b));
            }
            for (i, (w, b)) in k.layers.iter().enumerate() {
                out.push((format!("head{h}.k.{i}.w"), w));
                out.push((format!("head{h}.k.{i}.b"), b));
            }
        }
        for (i, (w, b)) in self.classifier.layers.iter().enumerate() {
            out.push((format!("classifier.{i}.w"), w));
            out.push((format!("classifier.{i}.b"), b));
        }
        out
    }

    /// Mutable tensors in the same order as [`ModelParams::named`].
    pub fn tensors_mut(&mut self) -> Vec<&mut DenseMatrix> {
        let mut out: Vec<&mut DenseMatrix> = Vec::new();
        for w in self.gcn.iter_mut() {
            out.push(w);
        }
        for (q, k) in self.q_mlps.iter_mut().zip(self.k_mlps.iter_mut()) {
            for (w, b) in q.layers.iter_mut() {
                out.push(w);
                out.push(b);
            }
            for (w, b) in k.layers.iter_mut() {
                out.push(w);
                out.push(b);
            }
        }
        for (w, b) in self.classifier.layers.iter_mut() {
            out.push(w);
            out.push(b);
        }
        out
    }

    /// Owned snapshot of all tensors in flattening order.
    pub fn tensors_cloned(&self) -> Vec<DenseMatrix> {
        self.named().into_iter().map(|(_, t)| t.clone()).collect()
    }

    /// Overwrites all tensors from a flat list in flattening order.
    pub fn assign(&mut self, flat: &[DenseMatrix]) {
        let mut slots = self.tensors_mut();
        assert_eq!(slots.len(), flat.len(), "parameter count mismatch");
        for (slot, src) in slots.iter_mut().zip(flat) {
            **slot = src.clone();
        }
    }
}

/// Handles for one model mounted on a tape, in the same structure as
/// [`ModelParams`].
pub struct TapedParams {
    pub gcn: Vec<Tensor>,
    pub q_mlps: Vec<Vec<(Tensor, Tensor)>>,
    pub k_mlps: Vec<Vec<(Tensor, Tensor)>>,
    pub classifier: Vec<(Tensor, Tensor)>,
}

impl TapedParams {
    pub fn mount(params: &ModelParams, tape: &Tape) -> TapedParams {
        TapedParams {
            gcn: params.gcn.iter().map(|w| tape.leaf(w.clone())).collect(),
            q_mlps: params.q_mlps.iter().map(|m| m.mount(tape)).collect(),
            k_mlps: params.k_mlps.iter().map(|m| m.mount(tape)).collect(),
            classifier: params.classifier.mount(tape),
        }
    }

    /// Leaf handles in [`ModelParams::named`] order, for gradient reads.
    pub fn leaves(&self) -> Vec<Tensor> {
        let mut out = Vec::new();
        out.extend(self.gcn.iter().copied());
        for (q, k) in self.q_mlps.iter().zip(&self.k_mlps) {
            for &(w, b) in q {
                out.push(w);
                out.push(b);
            }
            for &(w, b) in k {
                out.push(w);
                out.push(b);
            }
        }
        for &(w, b) in &self.classifier {
            out.push(w);
            out.push(b);
        }
        out
    }
}

const TENSOR_MAGIC: &[u8; 4] = b"WPT1";

/// Writes named tensors plus a free-form metadata string. The layout is
/// versioned and endian-fixed (all integers and f64 bit patterns little
/// endian), so a save/load round trip is bit-exact on any platform.
pub fn save_tensors(
    path: impl AsRef<Path>,
    entries: &[(String, &DenseMatrix)],
    meta: &str,
) -> std::io::Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(TENSOR_MAGIC);
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(meta.as_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.extend_from_slice(&(tensor.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(tensor.cols() as u64).to_le_bytes());
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)
}

/// Reads a container written by [`save_tensors`].
pub fn load_tensors(
    path: impl AsRef<Path>,
) -> std::io::Result<(Vec<(String, DenseMatrix)>, String)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut at = 0usize;
    let take = |at: &mut usize, n: usize| -> std::io::Result<&[u8]> {
        if *at + n > bytes.len() {
            return Err(fail("truncated tensor file"));
        }
        let s = &bytes[*at..*at + n];
        *at += n;
        Ok(s)
    };
    if take(&mut at, 4)? != TENSOR_MAGIC {
        return Err(fail("bad magic; not a tensor container"));
    }
    let meta_len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let meta = String::from_utf8(take(&mut at, meta_len)?.to_vec())
        .map_err(|_| fail("metadata is not utf-8"))?;
    let count = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = u16::from_le_bytes(take(&mut at, 2)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut at, name_len)?.to_vec())
            .map_err(|_| fail("tensor name is not utf-8"))?;
        let rows = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
        let cols = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let bits = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
            data.push(f64::from_bits(bits));
        }
        entries.push((name, DenseMatrix::from_vec(rows, cols, data)));
    }
    Ok((entries, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_value_and_grad() {
        let tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_vec(1, 1, vec![0.0]));
        let s = tape.sigmoid(x);
        assert_eq!(tape.get(s, 0, 0), 0.5);
        let grads = tape.backward(s);
        assert_eq!(grads.of(x).get(0, 0), 0.25);
    }

    #[test]
    fn masked_softmax_single_neighbor() {
        let tape = Tape::new();
        let g = Graph::build(2, &[(0, 1)]).unwrap();
        let x = tape.leaf(DenseMatrix::from_vec(2, 2, vec![0.0, 3.0, -1.0, 0.0]));
        let p = tape.row_masked_softmax(x, &g);
        assert_eq!(tape.get(p, 0, 1), 1.0);
        assert_eq!(tape.get(p, 1, 0), 1.0);
        assert_eq!(tape.get(p, 0, 0), 0.0);
    }

    #[test]
    fn masked_softmax_isolated_row_zero() {
        let tape = Tape::new();
        let g = Graph::build(3, &[(0, 1)]).unwrap();
        let x = tape.leaf(DenseMatrix::from_vec(3, 3, vec![1.0; 9]));
        let p = tape.row_masked_softmax(x, &g);
        assert_eq!(tape.value(p).row(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn masked_softmax_rows_sum_to_one() {
        let g = Graph::build(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let tape = Tape::new();
        let mut stream = rng::stream(5);
        let x = tape.leaf(glorot(4, 4, &mut stream));
        let p = tape.row_masked_softmax(x, &g);
        let pv = tape.value(p);
        for v in 0..4 {
            let s: f64 = pv.row(v).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matmul_grads_match_fd() {
        let mut stream = rng::stream(3);
        let a0 = glorot(3, 4, &mut stream);
        let b0 = glorot(4, 2, &mut stream);
        let params = vec![a0, b0];
        let forward = |p: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
            let tape = Tape::new();
            let a = tape.leaf(p[0].clone());
            let b = tape.leaf(p[1].clone());
            let c = tape.matmul(a, b);
            let s = tape.sigmoid(c);
            let t = tape.trace(tape.matmul(tape.transpose(s), s));
            let grads = tape.backward(t);
            (
                tape.get(t, 0, 0),
                vec![grads.of(a).clone(), grads.of(b).clone()],
            )
        };
        let (_, analytic) = forward(&params);
        let mut loss = |p: &[DenseMatrix]| forward(p).0;
        let report = grad_check(&mut loss, &params, &analytic, 1e-5, 64, 1);
        assert!(report.max_rel_err < 1e-4, "max err {}", report.max_rel_err);
    }

    #[test]
    fn composed_ops_grads_match_fd() {
        let g = Graph::build(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let mut stream = rng::stream(9);
        let params = vec![glorot(4, 4, &mut stream), glorot(4, 4, &mut stream)];
        let forward = |p: &[DenseMatrix]| -> (f64, Vec<DenseMatrix>) {
            let tape = Tape::new();
            let x = tape.leaf(p[0].clone());
            let w = tape.leaf(p[1].clone());
            let scores = tape.matmul(x, tape.transpose(w));
            let pmat = tape.row_masked_softmax(scores, &g);
            let p2 = tape.matmul(pmat, pmat);
            let top = tape.select_rows(p2, &[0, 1]);
            let corner = tape.select_cols(top, &[0, 1]);
            let tr = tape.trace(corner);
            let e = tape.entry(p2, 0, 1);
            let half = tape.scalar_mul(tape.sub(tr, e), 0.5);
            let pair = tape.concat_cols(&[tr, e]);
            let stacked = tape.concat_rows(&[pair, tape.scalar_mul(pair, 2.0)]);
            let biased = tape.add_bias_row(stacked, tape.scalar_mul(pair, 0.5));
            let col = tape.transpose(tape.select_rows(biased, &[1]));
            let shifted = tape.add(col, tape.concat_rows(&[half, half]));
            let loss = tape.mse_loss(shifted, &[0.3, -0.1]);
            let grads = tape.backward(loss);
            (
                tape.get(loss, 0, 0),
                vec![grads.of(x).clone(), grads.of(w).clone()],
            )
        };
        let (_, analytic) = forward(&params);
        let mut loss = |p: &[DenseMatrix]| forward(p).0;
        let report = grad_check(&mut loss, &params, &analytic, 1e-5, 32, 2);
        assert!(report.max_rel_err < 1e-4, "max err {}", report.max_rel_err);
    }

    #[test]
    fn backward_is_linear() {
        // grad of (f + f) must equal exactly twice grad of f
        let tape = Tape::new();
        let x = tape.leaf(DenseMatrix::from_vec(2, 2, vec![0.3, -0.7, 1.1, 0.2]));
        let s = tape.sigmoid(x);
        let t = tape.trace(s);
        let doubled = tape.add(t, t);
        let g2 = tape.backward(doubled);
        let g1 = tape.backward(t);
        for (a, b) in g2.of(x).data().iter().zip(g1.of(x).data()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn gcn_layer_cases() {
        // edgeless graph, identity weights: relu(z)
        let g = Graph::build(2, &[]).unwrap();
        let tape = Tape::new();
        let z = tape.leaf(DenseMatrix::from_vec(2, 2, vec![1.0, -2.0, 3.0, -4.0]));
        let w = tape.leaf(DenseMatrix::identity(2));
        let out = tape.value(gcn_layer(&tape, &g, z, w));
        assert_eq!(out.data(), &[1.0, 0.0, 3.0, 0.0]);

        // K2 with all-ones z: normalization preserves constant columns
        let g = Graph::build(2, &[(0, 1)]).unwrap();
        let tape = Tape::new();
        let z = tape.leaf(DenseMatrix::from_vec(2, 1, vec![1.0, 1.0]));
        let w = tape.leaf(DenseMatrix::identity(1));
        let out = tape.value(gcn_layer(&tape, &g, z, w));
        assert!((out.get(0, 0) - 1.0).abs() < 1e-12);
        assert!((out.get(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gcn_matches_dense_oracle() {
        let g = Graph::build(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let mut stream = rng::stream(21);
        let z0 = glorot(5, 3, &mut stream);
        let w0 = glorot(3, 2, &mut stream);
        let tape = Tape::new();
        let z = tape.leaf(z0.clone());
        let w = tape.leaf(w0.clone());
        let got = tape.value(gcn_layer(&tape, &g, z, w));

        // independent dense computation
        let n = 5;
        let mut a_hat = vec![vec![0.0; n]; n];
        for v in 0..n {
            a_hat[v][v] = 1.0;
            for &u in g.neighbors(v) {
                a_hat[v][u] = 1.0;
            }
        }
        let deg: Vec<f64> = (0..n).map(|v| g.degree(v) as f64 + 1.0).collect();
        for v in 0..n {
            for u in 0..n {
                a_hat[v][u] /= (deg[v] * deg[u]).sqrt();
            }
        }
        for v in 0..n {
            for c in 0..2 {
                let mut acc = 0.0;
                for u in 0..n {
                    for k in 0..3 {
                        acc += a_hat[v][u] * z0.get(u, k) * w0.get(k, c);
                    }
                }
                let want = acc.max(0.0);
                assert!((got.get(v, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mlp_zero_weights_broadcast_bias() {
        let tape = Tape::new();
        let w = tape.leaf(DenseMatrix::zeros(3, 2));
        let b = tape.leaf(DenseMatrix::from_vec(1, 2, vec![0.5, -1.5]));
        let x = tape.leaf(DenseMatrix::from_vec(2, 3, vec![1.0; 6]));
        let out = tape.value(mlp_forward(&tape, &[(w, b)], x));
        assert_eq!(out.row(0), &[0.5, -1.5]);
        assert_eq!(out.row(1), &[0.5, -1.5]);
    }

    #[test]
    fn mlp_identity_passthrough() {
        let tape = Tape::new();
        let w = tape.leaf(DenseMatrix::identity(3));
        let b = tape.leaf(DenseMatrix::zeros(1, 3));
        let x = tape.leaf(DenseMatrix::from_vec(1, 3, vec![0.1, -0.7, 2.0]));
        let out = tape.value(mlp_forward(&tape, &[(w, b)], x));
        assert_eq!(out.row(0), &[0.1, -0.7, 2.0]);
    }

    #[test]
    fn adam_zero_grad_keeps_params() {
        let mut params = vec![DenseMatrix::from_vec(1, 2, vec![0.5, -0.5])];
        let grads = vec![DenseMatrix::zeros(1, 2)];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, 0.1, (0.9, 0.999), 1e-8, 0.0);
        assert_eq!(params[0].data(), &[0.5, -0.5]);
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut params = vec![DenseMatrix::from_vec(1, 1, vec![1.0])];
        let grads = vec![DenseMatrix::from_vec(1, 1, vec![1.0])];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, 0.1, (0.9, 0.999), 1e-8, 0.0);
        let delta = 1.0 - params[0].get(0, 0);
        assert!((delta - 0.1).abs() < 1e-6, "delta {delta}");
    }

    #[test]
    fn adam_descends_quadratic_bowl() {
        let mut params = vec![DenseMatrix::from_vec(1, 2, vec![3.0, -2.0])];
        let mut state = AdamState::new(&params);
        let loss_of = |p: &DenseMatrix| p.get(0, 0).powi(2) + 2.0 * p.get(0, 1).powi(2);
        let start = loss_of(&params[0]);
        for _ in 0..1500 {
            let g = DenseMatrix::from_vec(
                1,
                2,
                vec![2.0 * params[0].get(0, 0), 4.0 * params[0].get(0, 1)],
            );
            adam_step(&mut params, &[g], &mut state, 0.02, (0.9, 0.999), 1e-8, 0.0);
        }
        let end = loss_of(&params[0]);
        assert!(end < 1e-2, "end loss {end}");
        assert!(end < start);
    }

    #[test]
    fn tensor_container_roundtrip_bit_exact() {
        let dir = std::env::temp_dir().join("wp_autodiff_ckpt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.bin");
        let mut stream = rng::stream(33);
        let a = glorot(3, 5, &mut stream);
        let b = DenseMatrix::from_vec(1, 3, vec![f64::MIN_POSITIVE, -0.0, 1.0 / 3.0]);
        let entries = vec![("alpha".to_string(), &a), ("beta.b".to_string(), &b)];
        save_tensors(&path, &entries, "k=v\nnote=x\n").unwrap();
        let (loaded, meta) = load_tensors(&path).unwrap();
        assert_eq!(meta, "k=v\nnote=x\n");
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].0, "alpha");
        for (x, y) in loaded[0].1.data().iter().zip(a.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in loaded[1].1.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn model_params_ordering_stable() {
        let mut stream = rng::stream(1);
        let p = ModelParams::init(&[4, 8, 8], &[20, 8, 8], 2, &[62, 124, 62, 1], &mut stream);
        let names: Vec<String> = p.named().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names[0], "gcn.0");
        assert_eq!(names[2], "head0.q.0.w");
        assert!(names.last().unwrap().starts_with("classifier."));
        let mut p2 = p.clone();
        let flat = p.tensors_cloned();
        p2.assign(&flat);
        assert_eq!(p, p2);
        assert_eq!(p.named().len(), p.tensors_cloned().len());
    }
}
