//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! [`Tape::grad`] builds the adjoint computation out of ordinary tape
//! operations, so its results are themselves differentiable: calling
//! `grad` on an expression that contains earlier gradients yields second
//! derivatives.
//!
//! Batched operations treat row `n` of an `N × (p·q)` node as a row-major
//! `p × q` matrix attached to point `n`.

use ndarray::{s, Array2, Axis};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulNT(usize, usize),
    MatMulTN(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    SumRows(usize),
    BroadcastRows(usize),
    MulCol(usize, usize),
    SumCols(usize),
    BroadcastCols(usize),
    MulRowConst(usize, Vec<f64>),
    Tanh(usize),
    TanhGrad(usize, usize),
    SumAll(usize),
    BroadcastScalar(usize),
    SliceCols(usize, usize),
    PadCols(usize, usize),
    ConcatCols(Vec<usize>),
    Transpose(usize),
    Reshape(usize),
    Bmv(usize, usize),
    BmvT(usize, usize),
    Outer(usize, usize),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Array2<f64>,
}

/// Recorded computation; nodes are appended in evaluation order.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, op: Op, value: Array2<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn v(&self, i: usize) -> &Array2<f64> {
        &self.nodes[i].value
    }

    pub fn value(&self, x: Var) -> &Array2<f64> {
        &self.nodes[x.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, x: Var) -> f64 {
        self.nodes[x.0].value[[0, 0]]
    }

    /// Input node; parameters and data alike.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0).dot(self.v(b.0));
        self.push(Op::MatMul(a.0, b.0), v)
    }

    /// `a·bᵀ`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0).dot(&self.v(b.0).t());
        self.push(Op::MatMulNT(a.0, b.0), v)
    }

    /// `aᵀ·b`
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0).t().dot(self.v(b.0));
        self.push(Op::MatMulTN(a.0, b.0), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0) + self.v(b.0);
        self.push(Op::Add(a.0, b.0), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0) - self.v(b.0);
        self.push(Op::Sub(a.0, b.0), v)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.v(a.0) * self.v(b.0);
        self.push(Op::Mul(a.0, b.0), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.v(a.0) * c;
        self.push(Op::Scale(a.0, c), v)
    }

    /// Adds the `1 × m` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let v = self.v(a.0) + self.v(r.0);
        self.push(Op::AddRow(a.0, r.0), v)
    }

    pub fn sum_rows(&mut self, a: Var) -> Var {
        let v = self.v(a.0).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(Op::SumRows(a.0), v)
    }

    pub fn broadcast_rows(&mut self, a: Var, n: usize) -> Var {
        let row = self.v(a.0);
        let v = row.broadcast((n, row.ncols())).expect("row vector").to_owned();
        self.push(Op::BroadcastRows(a.0), v)
    }

    /// Scales row `n` of `a` by `c[n, 0]`.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Var {
        let v = self.v(a.0) * self.v(c.0);
        self.push(Op::MulCol(a.0, c.0), v)
    }

    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.v(a.0).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::SumCols(a.0), v)
    }

    pub fn broadcast_cols(&mut self, a: Var, m: usize) -> Var {
        let col = self.v(a.0);
        let v = col.broadcast((col.nrows(), m)).expect("column vector").to_owned();
        self.push(Op::BroadcastCols(a.0), v)
    }

    /// Scales column `j` of `a` by the constant `w[j]`.
    pub fn mul_row_const(&mut self, a: Var, w: &[f64]) -> Var {
        let mut v = self.v(a.0).clone();
        for mut row in v.rows_mut() {
            row.iter_mut().zip(w).for_each(|(x, c)| *x *= c);
        }
        self.push(Op::MulRowConst(a.0, w.to_vec()), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.v(a.0).mapv(f64::tanh);
        self.push(Op::Tanh(a.0), v)
    }

    /// `g ⊙ (1 − y²)`
    pub fn tanh_grad(&mut self, g: Var, y: Var) -> Var {
        let mut v = self.v(g.0).clone();
        v.zip_mut_with(self.v(y.0), |a, &t| *a *= 1.0 - t * t);
        self.push(Op::TanhGrad(g.0, y.0), v)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.v(a.0).sum());
        self.push(Op::SumAll(a.0), v)
    }

    pub fn broadcast_scalar(&mut self, a: Var, shape: (usize, usize)) -> Var {
        let v = Array2::from_elem(shape, self.v(a.0)[[0, 0]]);
        self.push(Op::BroadcastScalar(a.0), v)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.v(a.0).slice(s![.., start..start + len]).to_owned();
        self.push(Op::SliceCols(a.0, start), v)
    }

    /// Places `a` at columns `start..` of a zero matrix with `total` columns.
    pub fn pad_cols(&mut self, a: Var, start: usize, total: usize) -> Var {
        let src = self.v(a.0);
        let mut v = Array2::zeros((src.nrows(), total));
        v.slice_mut(s![.., start..start + src.ncols()]).assign(src);
        self.push(Op::PadCols(a.0, start), v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.v(p.0).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("equal row counts");
        self.push(Op::ConcatCols(parts.iter().map(|p| p.0).collect()), v)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.v(a.0).t().to_owned();
        self.push(Op::Transpose(a.0), v)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, shape: (usize, usize)) -> Var {
        let src = self.v(a.0);
        let data: Vec<f64> = src.iter().copied().collect();
        let v = Array2::from_shape_vec(shape, data).expect("reshape preserves size");
        self.push(Op::Reshape(a.0), v)
    }

    /// Per-point `B_n·u_n` with `B_n` the `p × q` matrix in row `n` of `b`.
    pub fn bmv(&mut self, b: Var, u: Var) -> Var {
        let v = bmv(self.v(b.0), self.v(u.0));
        self.push(Op::Bmv(b.0, u.0), v)
    }

    /// Per-point `B_nᵀ·v_n`.
    pub fn bmv_t(&mut self, b: Var, v: Var) -> Var {
        let out = bmv_t(self.v(b.0), self.v(v.0));
        self.push(Op::BmvT(b.0, v.0), out)
    }

    /// Per-point outer product `a_n b_nᵀ`, flattened row-major.
    pub fn outer(&mut self, a: Var, b: Var) -> Var {
        let v = outer(self.v(a.0), self.v(b.0));
        self.push(Op::Outer(a.0, b.0), v)
    }

    fn zeros_like(&mut self, i: usize) -> Var {
        let shape = self.v(i).dim();
        self.leaf(Array2::zeros(shape))
    }

    /// Gradients of the `1 × 1` node `out` with respect to each of `wrt`,
    /// recorded on the tape. Inputs `out` does not depend on get zeros.
    pub fn grad(&mut self, out: Var, wrt: &[Var]) -> Vec<Var> {
        let n = out.0 + 1;
        let mut dep = vec![false; n];
        for w in wrt {
            if w.0 < n {
                dep[w.0] = true;
            }
        }
        for i in 0..n {
            if dep[i] {
                continue;
            }
            dep[i] = inputs(&self.nodes[i].op).iter().any(|&j| dep[j]);
        }
        let mut adj: Vec<Option<Var>> = vec![None; n];
        if dep[out.0] {
            adj[out.0] = Some(self.leaf(Array2::ones(self.v(out.0).dim())));
        }
        for i in (0..n).rev() {
            let Some(g) = adj[i] else { continue };
            if !dep[i] {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let contribs = self.vjp(&op, i, g, &dep);
            for (j, c) in contribs {
                adj[j] = Some(match adj[j] {
                    Some(prev) => self.add(prev, c),
                    None => c,
                });
            }
        }
        wrt.iter()
            .map(|w| match adj.get(w.0).copied().flatten() {
                Some(g) => g,
                None => self.zeros_like(w.0),
            })
            .collect()
    }

    fn vjp(&mut self, op: &Op, out: usize, g: Var, dep: &[bool]) -> Vec<(usize, Var)> {
        let mut res = Vec::with_capacity(2);
        let need = |j: usize| dep[j];
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if need(a) {
                    res.push((a, self.matmul_nt(g, Var(b))));
                }
                if need(b) {
                    res.push((b, self.matmul_tn(Var(a), g)));
                }
            }
            Op::MatMulNT(a, b) => {
                if need(a) {
                    res.push((a, self.matmul(g, Var(b))));
                }
                if need(b) {
                    res.push((b, self.matmul_tn(g, Var(a))));
                }
            }
            Op::MatMulTN(a, b) => {
                if need(a) {
                    res.push((a, self.matmul_nt(Var(b), g)));
                }
                if need(b) {
                    res.push((b, self.matmul(Var(a), g)));
                }
            }
            Op::Add(a, b) => {
                if need(a) {
                    res.push((a, g));
                }
                if need(b) {
                    res.push((b, g));
                }
            }
            Op::Sub(a, b) => {
                if need(a) {
                    res.push((a, g));
                }
                if need(b) {
                    res.push((b, self.scale(g, -1.0)));
                }
            }
            Op::Mul(a, b) => {
                if need(a) {
                    res.push((a, self.mul(g, Var(b))));
                }
                if need(b) {
                    res.push((b, self.mul(g, Var(a))));
                }
            }
            Op::Scale(a, c) => res.push((a, self.scale(g, c))),
            Op::AddRow(a, r) => {
                if need(a) {
                    res.push((a, g));
                }
                if need(r) {
                    res.push((r, self.sum_rows(g)));
                }
            }
            Op::SumRows(a) => {
                let rows = self.v(a).nrows();
                res.push((a, self.broadcast_rows(g, rows)));
            }
            Op::BroadcastRows(a) => res.push((a, self.sum_rows(g))),
            Op::MulCol(a, c) => {
                if need(a) {
                    res.push((a, self.mul_col(g, Var(c))));
                }
                if need(c) {
                    let p = self.mul(g, Var(a));
                    res.push((c, self.sum_cols(p)));
                }
            }
            Op::SumCols(a) => {
                let cols = self.v(a).ncols();
                res.push((a, self.broadcast_cols(g, cols)));
            }
            Op::BroadcastCols(a) => res.push((a, self.sum_cols(g))),
            Op::MulRowConst(a, ref w) => res.push((a, self.mul_row_const(g, w))),
            Op::Tanh(a) => res.push((a, self.tanh_grad(g, Var(out)))),
            Op::TanhGrad(g0, y) => {
                if need(g0) {
                    res.push((g0, self.tanh_grad(g, Var(y))));
                }
                if need(y) {
                    let p = self.mul(g, Var(g0));
                    let p = self.mul(p, Var(y));
                    res.push((y, self.scale(p, -2.0)));
                }
            }
            Op::SumAll(a) => {
                let shape = self.v(a).dim();
                res.push((a, self.broadcast_scalar(g, shape)));
            }
            Op::BroadcastScalar(a) => res.push((a, self.sum_all(g))),
            Op::SliceCols(a, start) => {
                let total = self.v(a).ncols();
                res.push((a, self.pad_cols(g, start, total)));
            }
            Op::PadCols(a, start) => {
                let len = self.v(a).ncols();
                res.push((a, self.slice_cols(g, start, len)));
            }
            Op::ConcatCols(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.v(p).ncols();
                    if need(p) {
                        res.push((p, self.slice_cols(g, offset, len)));
                    }
                    offset += len;
                }
            }
            Op::Transpose(a) => res.push((a, self.transpose(g))),
            Op::Reshape(a) => {
                let shape = self.v(a).dim();
                res.push((a, self.reshape(g, shape)));
            }
            Op::Bmv(b, u) => {
                if need(b) {
                    res.push((b, self.outer(g, Var(u))));
                }
                if need(u) {
                    res.push((u, self.bmv_t(Var(b), g)));
                }
            }
            Op::BmvT(b, v) => {
                if need(b) {
                    res.push((b, self.outer(Var(v), g)));
                }
                if need(v) {
                    res.push((v, self.bmv(Var(b), g)));
                }
            }
            Op::Outer(a, b) => {
                if need(a) {
                    res.push((a, self.bmv(g, Var(b))));
                }
                if need(b) {
                    res.push((b, self.bmv_t(g, Var(a))));
                }
            }
        }
        res
    }
}

fn inputs(op: &Op) -> Vec<usize> {
    match *op {
        Op::Leaf => vec![],
        Op::MatMul(a, b)
        | Op::MatMulNT(a, b)
        | Op::MatMulTN(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::AddRow(a, b)
        | Op::MulCol(a, b)
        | Op::TanhGrad(a, b)
        | Op::Bmv(a, b)
        | Op::BmvT(a, b)
        | Op::Outer(a, b) => vec![a, b],
        Op::Scale(a, _)
        | Op::SumRows(a)
        | Op::BroadcastRows(a)
        | Op::SumCols(a)
        | Op::BroadcastCols(a)
        | Op::MulRowConst(a, _)
        | Op::Tanh(a)
        | Op::SumAll(a)
        | Op::BroadcastScalar(a)
        | Op::SliceCols(a, _)
        | Op::PadCols(a, _)
        | Op::Transpose(a)
        | Op::Reshape(a) => vec![a],
        Op::ConcatCols(ref parts) => parts.clone(),
    }
}

fn bmv(b: &Array2<f64>, u: &Array2<f64>) -> Array2<f64> {
    let (n, q) = u.dim();
    let p = b.ncols() / q;
    assert_eq!(b.ncols(), p * q, "batched matrix width");
    let mut out = Array2::zeros((n, p));
    for r in 0..n {
        let br = b.row(r);
        let ur = u.row(r);
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..q {
                acc += br[i * q + j] * ur[j];
            }
            out[[r, i]] = acc;
        }
    }
    out
}

fn bmv_t(b: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let (n, p) = v.dim();
    let q = b.ncols() / p;
    assert_eq!(b.ncols(), p * q, "batched matrix width");
    let mut out = Array2::zeros((n, q));
    for r in 0..n {
        let br = b.row(r);
        let vr = v.row(r);
        let mut orow = out.row_mut(r);
        for i in 0..p {
            let vi = vr[i];
            for j in 0..q {
                orow[j] += br[i * q + j] * vi;
            }
        }
    }
    out
}

fn outer(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (n, p) = a.dim();
    let q = b.ncols();
    let mut out = Array2::zeros((n, p * q));
    for r in 0..n {
        for i in 0..p {
            let ai = a[[r, i]];
            for j in 0..q {
                out[[r, i * q + j]] = ai * b[[r, j]];
            }
        }
    }
    out
}
