use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use super::{AutodiffError, ParamId, ParamStore, Result};
use crate::tensor::{Matrix, SparseMatrix};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Param(ParamId),
    Constant,
    MatMul(usize, usize),
    Transpose(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddRow(usize, usize),
    MulCol(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Tanh(usize),
    Artanh(usize),
    Arcosh(usize),
    Sigmoid(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Exp(usize),
    Ln(usize),
    Softplus(usize),
    Clamp(usize, f64, f64),
    RowNorm(usize),
    RowSum(usize),
    ColMean(usize),
    Sum(usize),
    Mean(usize),
    Max(usize, usize),
    LogSumExp(usize),
    ConcatCols(usize, usize),
    ConcatRows(Vec<usize>),
    GatherRows(usize, Arc<[usize]>),
    ScatterAddRows(usize, Arc<[usize]>),
    SegmentSoftmax(usize, Arc<[usize]>, usize),
    SpMM(Arc<SparseMatrix>, usize),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
}

/// Record of one forward computation. Single-threaded; create one per step.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, lhs: &Matrix, rhs: &Matrix) -> AutodiffError {
    AutodiffError::Shape { op, lhs: lhs.shape(), rhs: rhs.shape() }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var { tape: self.id, index: self.nodes.len() - 1 }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        Ok(v.index)
    }

    fn val(&self, i: usize) -> &Matrix {
        &self.nodes[i].value
    }

    /// Current value of a recorded variable.
    ///
    /// Panics if `v` was not recorded on this tape.
    pub fn value(&self, v: Var) -> &Matrix {
        let i = self.idx(v).expect("variable recorded on a different tape");
        &self.nodes[i].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    /// Records a parameter leaf; gradients flow back into `store` on backward.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    /// Records a constant leaf (no gradient).
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Matrix::scalar(value))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: impl FnOnce(usize) -> Op) -> Result<Var> {
        let ai = self.idx(a)?;
        let out = self.val(ai).map(f);
        Ok(self.push(out, op(ai)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        if self.val(ai).shape() != self.val(bi).shape() {
            return Err(shape_err(op, self.val(ai), self.val(bi)));
        }
        Ok((ai, bi))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        if self.val(ai).cols() != self.val(bi).rows() {
            return Err(shape_err("matmul", self.val(ai), self.val(bi)));
        }
        let out = self.val(ai).matmul(self.val(bi));
        Ok(self.push(out, Op::MatMul(ai, bi)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let out = self.val(ai).transpose();
        Ok(self.push(out, Op::Transpose(ai)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = self.same_shape("add", a, b)?;
        let out = self.val(ai).zip_map(self.val(bi), |x, y| x + y);
        Ok(self.push(out, Op::Add(ai, bi)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = self.same_shape("sub", a, b)?;
        let out = self.val(ai).zip_map(self.val(bi), |x, y| x - y);
        Ok(self.push(out, Op::Sub(ai, bi)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = self.same_shape("mul", a, b)?;
        let out = self.val(ai).zip_map(self.val(bi), |x, y| x * y);
        Ok(self.push(out, Op::Mul(ai, bi)))
    }

    /// Elementwise quotient; a zero divisor is a domain error.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = self.same_shape("div", a, b)?;
        if let Some(&z) = self.val(bi).as_slice().iter().find(|&&x| x == 0.0 || x.is_nan()) {
            return Err(AutodiffError::Domain { op: "div", value: z, domain: "nonzero divisor" });
        }
        let out = self.val(ai).zip_map(self.val(bi), |x, y| x / y);
        Ok(self.push(out, Op::Div(ai, bi)))
    }

    /// `a + row`, broadcasting a `1 x cols` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ai, ri) = (self.idx(a)?, self.idx(row)?);
        let (av, rv) = (self.val(ai), self.val(ri));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(shape_err("add_row", av, rv));
        }
        let mut out = av.clone();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(rv.as_slice()) {
                *o += b;
            }
        }
        Ok(self.push(out, Op::AddRow(ai, ri)))
    }

    /// `a ∘ col`, broadcasting an `rows x 1` column across every column of `a`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (ai, ci) = (self.idx(a)?, self.idx(col)?);
        let (av, cv) = (self.val(ai), self.val(ci));
        if cv.cols() != 1 || cv.rows() != av.rows() {
            return Err(shape_err("mul_col", av, cv));
        }
        let mut out = av.clone();
        for i in 0..out.rows() {
            let s = cv.as_slice()[i];
            out.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
        Ok(self.push(out, Op::MulCol(ai, ci)))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.unary(a, |x| k * x, |i| Op::Scale(i, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Result<Var> {
        self.unary(a, |x| x + k, Op::AddScalar)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, libm::tanh, Op::Tanh)
    }

    /// Inverse hyperbolic tangent; requires every entry in (-1, 1).
    pub fn artanh(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        if let Some(&x) = self.val(ai).as_slice().iter().find(|x| !(x.abs() < 1.0)) {
            return Err(AutodiffError::Domain { op: "artanh", value: x, domain: "(-1, 1)" });
        }
        self.unary(a, libm::atanh, Op::Artanh)
    }

    /// Inverse hyperbolic cosine; requires every entry ≥ 1.
    pub fn arcosh(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        if let Some(&x) = self.val(ai).as_slice().iter().find(|&&x| !(x >= 1.0)) {
            return Err(AutodiffError::Domain { op: "arcosh", value: x, domain: "[1, inf)" });
        }
        self.unary(a, arcosh, Op::Arcosh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, sigmoid, Op::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, |i| Op::LeakyRelu(i, slope))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, libm::exp, Op::Exp)
    }

    /// Natural logarithm; requires strictly positive entries.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        if let Some(&x) = self.val(ai).as_slice().iter().find(|&&x| !(x > 0.0)) {
            return Err(AutodiffError::Domain { op: "ln", value: x, domain: "(0, inf)" });
        }
        self.unary(a, libm::log, Op::Ln)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, softplus, Op::Softplus)
    }

    /// Clamps every entry into `[lo, hi]`; clamped entries pass no gradient.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary(a, |x| x.clamp(lo, hi), |i| Op::Clamp(i, lo, hi))
    }

    /// Euclidean norm of each row, as a `rows x 1` column.
    pub fn row_norm(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        let out: Vec<f64> = (0..av.rows()).map(|i| crate::tensor::l2_norm(av.row(i))).collect();
        let out = Matrix::from_vec(av.rows(), 1, out);
        Ok(self.push(out, Op::RowNorm(ai)))
    }

    /// Sum of each row, as a `rows x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        let out: Vec<f64> = (0..av.rows()).map(|i| av.row(i).iter().sum()).collect();
        let out = Matrix::from_vec(av.rows(), 1, out);
        Ok(self.push(out, Op::RowSum(ai)))
    }

    /// Column-wise mean over rows, as a `1 x cols` row.
    pub fn col_mean(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if av.rows() == 0 {
            return Err(AutodiffError::Contract("col_mean of a matrix with zero rows"));
        }
        let mut out = Matrix::zeros(1, av.cols());
        for i in 0..av.rows() {
            out.add_assign(&Matrix::row_vector(av.row(i)));
        }
        let n = av.rows() as f64;
        out.as_mut_slice().iter_mut().for_each(|x| *x /= n);
        Ok(self.push(out, Op::ColMean(ai)))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let out = Matrix::scalar(self.val(ai).sum());
        Ok(self.push(out, Op::Sum(ai)))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if av.is_empty() {
            return Err(AutodiffError::Contract("mean of an empty matrix"));
        }
        let out = Matrix::scalar(av.sum() / av.len() as f64);
        Ok(self.push(out, Op::Mean(ai)))
    }

    /// Largest entry; the gradient goes to the first maximizer.
    pub fn max(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if av.is_empty() {
            return Err(AutodiffError::Contract("max of an empty matrix"));
        }
        let (arg, best) =
            av.as_slice().iter().enumerate().fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) });
        Ok(self.push(Matrix::scalar(best), Op::Max(ai, arg)))
    }

    /// `ln Σ e^{x}` over all entries, shifted by the maximum for stability.
    pub fn log_sum_exp(&mut self, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if av.is_empty() {
            return Err(AutodiffError::Contract("log_sum_exp of an empty matrix"));
        }
        Ok(self.push(Matrix::scalar(log_sum_exp(av.as_slice())), Op::LogSumExp(ai)))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let (av, bv) = (self.val(ai), self.val(bi));
        if av.rows() != bv.rows() {
            return Err(shape_err("concat_cols", av, bv));
        }
        let mut out = Matrix::zeros(av.rows(), av.cols() + bv.cols());
        for i in 0..av.rows() {
            let row = out.row_mut(i);
            row[..av.cols()].copy_from_slice(av.row(i));
            row[av.cols()..].copy_from_slice(bv.row(i));
        }
        Ok(self.push(out, Op::ConcatCols(ai, bi)))
    }

    /// Stacks equally wide matrices vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let idx: Vec<usize> = parts.iter().map(|&v| self.idx(v)).collect::<Result<_>>()?;
        let first = idx.first().ok_or(AutodiffError::Contract("concat_rows of nothing"))?;
        let cols = self.val(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &i in &idx {
            let v = self.val(i);
            if v.cols() != cols {
                return Err(shape_err("concat_rows", self.val(*first), v));
            }
            data.extend_from_slice(v.as_slice());
            rows += v.rows();
        }
        Ok(self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(idx)))
    }

    /// Output row `k` is input row `index[k]`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if let Some(&bad) = index.iter().find(|&&r| r >= av.rows()) {
            return Err(AutodiffError::Shape { op: "gather_rows", lhs: av.shape(), rhs: (bad, 0) });
        }
        let mut out = Matrix::zeros(index.len(), av.cols());
        for (k, &r) in index.iter().enumerate() {
            out.row_mut(k).copy_from_slice(av.row(r));
        }
        Ok(self.push(out, Op::GatherRows(ai, index)))
    }

    /// Output row `r` is the sum of input rows `k` with `index[k] == r`.
    pub fn scatter_add_rows(&mut self, a: Var, index: Arc<[usize]>, rows: usize) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if index.len() != av.rows() {
            return Err(AutodiffError::Shape { op: "scatter_add_rows", lhs: av.shape(), rhs: (index.len(), 1) });
        }
        if let Some(&bad) = index.iter().find(|&&r| r >= rows) {
            return Err(AutodiffError::Shape { op: "scatter_add_rows", lhs: (rows, av.cols()), rhs: (bad, 0) });
        }
        let mut out = Matrix::zeros(rows, av.cols());
        for (k, &r) in index.iter().enumerate() {
            for (o, x) in out.row_mut(r).iter_mut().zip(av.row(k)) {
                *o += x;
            }
        }
        Ok(self.push(out, Op::ScatterAddRows(ai, index)))
    }

    /// Softmax of a column of scores within each segment (`segment[k]` names
    /// the group of entry `k`).
    pub fn segment_softmax(&mut self, a: Var, segment: Arc<[usize]>, segments: usize) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if av.cols() != 1 || segment.len() != av.rows() || segment.iter().any(|&s| s >= segments) {
            return Err(AutodiffError::Shape { op: "segment_softmax", lhs: av.shape(), rhs: (segment.len(), segments) });
        }
        let x = av.as_slice();
        let mut max = vec![f64::NEG_INFINITY; segments];
        for (k, &s) in segment.iter().enumerate() {
            max[s] = max[s].max(x[k]);
        }
        let mut e: Vec<f64> = segment.iter().enumerate().map(|(k, &s)| libm::exp(x[k] - max[s])).collect();
        let mut total = vec![0.0; segments];
        for (k, &s) in segment.iter().enumerate() {
            total[s] += e[k];
        }
        for (k, &s) in segment.iter().enumerate() {
            e[k] /= total[s];
        }
        let out = Matrix::from_vec(x.len(), 1, e);
        Ok(self.push(out, Op::SegmentSoftmax(ai, segment, segments)))
    }

    /// `op · a` for a constant sparse operator.
    pub fn spmm(&mut self, op: Arc<SparseMatrix>, a: Var) -> Result<Var> {
        let ai = self.idx(a)?;
        let av = self.val(ai);
        if op.cols() != av.rows() {
            return Err(AutodiffError::Shape { op: "spmm", lhs: (op.rows(), op.cols()), rhs: av.shape() });
        }
        let out = op.matmul(av);
        Ok(self.push(out, Op::SpMM(op, ai)))
    }

    /// Reverse pass from a scalar root. Parameter gradients are added to
    /// whatever `store` already holds.
    pub fn backward(&self, root: Var, store: &mut ParamStore) -> Result<()> {
        let ri = self.idx(root)?;
        let shape = self.val(ri).shape();
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarRoot(shape));
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; ri + 1];
        adj[ri] = Some(Matrix::scalar(1.0));
        for i in (0..=ri).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Param(id) => store.accumulate(*id, &g),
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    acc(&mut adj, *a, g.matmul_t(self.val(*b)));
                    acc(&mut adj, *b, self.val(*a).t_matmul(&g));
                }
                Op::Transpose(a) => acc(&mut adj, *a, g.transpose()),
                Op::Add(a, b) => {
                    acc(&mut adj, *b, g.clone());
                    acc(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *b, g.map(|x| -x));
                    acc(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    acc(&mut adj, *a, g.zip_map(self.val(*b), |g, y| g * y));
                    acc(&mut adj, *b, g.zip_map(self.val(*a), |g, x| g * x));
                }
                Op::Div(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    acc(&mut adj, *a, g.zip_map(bv, |g, d| g / d));
                    let mut gb = g.zip_map(av, |g, n| g * n);
                    gb = gb.zip_map(bv, |x, d| -x / (d * d));
                    acc(&mut adj, *b, gb);
                }
                Op::AddRow(a, r) => {
                    let mut gr = Matrix::zeros(1, g.cols());
                    for k in 0..g.rows() {
                        for (o, x) in gr.as_mut_slice().iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    acc(&mut adj, *r, gr);
                    acc(&mut adj, *a, g);
                }
                Op::MulCol(a, c) => {
                    let (av, cv) = (self.val(*a), self.val(*c));
                    let mut ga = g.clone();
                    let mut gc = Matrix::zeros(cv.rows(), 1);
                    for k in 0..g.rows() {
                        let s = cv.as_slice()[k];
                        ga.row_mut(k).iter_mut().for_each(|x| *x *= s);
                        gc.as_mut_slice()[k] = g.row(k).iter().zip(av.row(k)).map(|(p, q)| p * q).sum();
                    }
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *c, gc);
                }
                Op::Scale(a, k) => acc(&mut adj, *a, g.map(|x| k * x)),
                Op::AddScalar(a) => acc(&mut adj, *a, g),
                Op::Tanh(a) => acc(&mut adj, *a, g.zip_map(y, |g, t| g * (1.0 - t * t))),
                Op::Artanh(a) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| g / (1.0 - x * x))),
                Op::Arcosh(a) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| g / libm::sqrt((x - 1.0) * (x + 1.0)))),
                Op::Sigmoid(a) => acc(&mut adj, *a, g.zip_map(y, |g, s| g * s * (1.0 - s))),
                Op::Relu(a) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| if x > 0.0 { g } else { 0.0 })),
                Op::LeakyRelu(a, slope) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| if x > 0.0 { g } else { slope * g })),
                Op::Exp(a) => acc(&mut adj, *a, g.zip_map(y, |g, e| g * e)),
                Op::Ln(a) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| g / x)),
                Op::Softplus(a) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| g * sigmoid(x))),
                Op::Clamp(a, lo, hi) => acc(&mut adj, *a, g.zip_map(self.val(*a), |g, x| if x < *lo || x > *hi { 0.0 } else { g })),
                Op::RowNorm(a) => {
                    let av = self.val(*a);
                    let mut ga = av.clone();
                    for k in 0..av.rows() {
                        let s = g.as_slice()[k] / y.as_slice()[k].max(1e-15);
                        ga.row_mut(k).iter_mut().for_each(|x| *x *= s);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::RowSum(a) => {
                    let cols = self.val(*a).cols();
                    let mut ga = Matrix::zeros(g.rows(), cols);
                    for k in 0..g.rows() {
                        let s = g.as_slice()[k];
                        ga.row_mut(k).iter_mut().for_each(|x| *x = s);
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::ColMean(a) => {
                    let rows = self.val(*a).rows();
                    let mut ga = Matrix::zeros(rows, g.cols());
                    let inv = 1.0 / rows as f64;
                    for k in 0..rows {
                        for (o, x) in ga.row_mut(k).iter_mut().zip(g.as_slice()) {
                            *o = x * inv;
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.val(*a).shape();
                    acc(&mut adj, *a, Matrix::filled(r, c, g.item()));
                }
                Op::Mean(a) => {
                    let av = self.val(*a);
                    acc(&mut adj, *a, Matrix::filled(av.rows(), av.cols(), g.item() / av.len() as f64));
                }
                Op::Max(a, arg) => {
                    let (r, c) = self.val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    ga.as_mut_slice()[*arg] = g.item();
                    acc(&mut adj, *a, ga);
                }
                Op::LogSumExp(a) => {
                    let av = self.val(*a);
                    let lse = y.item();
                    let gv = g.item();
                    acc(&mut adj, *a, av.map(|x| gv * libm::exp(x - lse)));
                }
                Op::ConcatCols(a, b) => {
                    let ca = self.val(*a).cols();
                    let cb = self.val(*b).cols();
                    let mut ga = Matrix::zeros(g.rows(), ca);
                    let mut gb = Matrix::zeros(g.rows(), cb);
                    for k in 0..g.rows() {
                        ga.row_mut(k).copy_from_slice(&g.row(k)[..ca]);
                        gb.row_mut(k).copy_from_slice(&g.row(k)[ca..]);
                    }
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (r, c) = self.val(p).shape();
                        let gp = Matrix::from_vec(r, c, g.as_slice()[offset * c..(offset + r) * c].to_vec());
                        offset += r;
                        acc(&mut adj, p, gp);
                    }
                }
                Op::GatherRows(a, index) => {
                    let (r, c) = self.val(*a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for (k, &src) in index.iter().enumerate() {
                        for (o, x) in ga.row_mut(src).iter_mut().zip(g.row(k)) {
                            *o += x;
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::ScatterAddRows(a, index) => {
                    let c = g.cols();
                    let mut ga = Matrix::zeros(index.len(), c);
                    for (k, &dst) in index.iter().enumerate() {
                        ga.row_mut(k).copy_from_slice(g.row(dst));
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::SegmentSoftmax(a, segment, segments) => {
                    let (gs, ys) = (g.as_slice(), y.as_slice());
                    let mut dot = vec![0.0; *segments];
                    for (k, &s) in segment.iter().enumerate() {
                        dot[s] += gs[k] * ys[k];
                    }
                    let ga: Vec<f64> = segment.iter().enumerate().map(|(k, &s)| ys[k] * (gs[k] - dot[s])).collect();
                    acc(&mut adj, *a, Matrix::from_vec(ga.len(), 1, ga));
                }
                Op::SpMM(op, a) => acc(&mut adj, *a, op.t_matmul(&g)),
            }
        }
        Ok(())
    }
}

fn acc(adj: &mut [Option<Matrix>], i: usize, g: Matrix) {
    match &mut adj[i] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// `arcosh(x) = ln(x + √(x²−1))`, written to stay accurate near `x = 1`.
pub(crate) fn arcosh(x: f64) -> f64 {
    let t = x - 1.0;
    libm::log1p(t + libm::sqrt(t * (x + 1.0)))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let (top, m) = xs.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, x)| if x > best.1 { (i, x) } else { best });
    if !m.is_finite() {
        return m;
    }
    // log1p keeps tails far below the maximum from rounding away
    let rest: f64 = xs.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, x)| libm::exp(x - m)).sum();
    m + libm::log1p(rest)
}
