//! Define-by-run reverse-mode differentiation over `Matrix` values.
//!
//! A `Tape` records every operation of one forward pass; `Var::backward`
//! walks the record once in reverse and accumulates gradients into the
//! leaves that requested them. Tapes are rebuilt per forward pass and are
//! never shared between tasks.

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Recording tape. Cheap to clone (shared handle).
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

struct TapeInner {
    nodes: Vec<Node>,
    backward_done: bool,
}

struct Node {
    value: Matrix,
    grad: Option<Matrix>,
    requires_grad: bool,
    op: Op,
}

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Scale(usize, f64),
    Hadamard(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Log(usize),
    Exp(usize),
    Sqrt(usize),
    Abs(usize),
    ClampMin(usize, f64),
    RowSoftmax(usize),
    /// Softmax restricted to nonzero mask entries; zeros elsewhere.
    MaskedRowSoftmax(usize, Matrix),
    MeanRows(usize),
    SumRows(usize),
    SumCols(usize),
    MeanAll(usize),
    SumAll(usize),
    /// Broadcast a 1xd row over the n rows of the first input.
    AddRow(usize, usize),
    ConcatCols(usize, usize),
    Reshape(usize),
    ZeroDiag(usize),
    /// Extract one entry as a 1x1 matrix.
    Pick(usize, usize, usize),
    BatchNorm {
        input: usize,
        gamma: usize,
        beta: usize,
        xhat: Matrix,
        inv_std: Vec<f64>,
        train: bool,
    },
}

/// Handle to one recorded value.
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    idx: usize,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner {
                nodes: Vec::new(),
                backward_done: false,
            })),
        }
    }

    /// Record a leaf value. Gradients accumulate into it only when
    /// `requires_grad` is set.
    pub fn leaf(&self, value: Matrix, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    /// Record a constant (never receives gradient).
    pub fn constant(&self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Matrix, requires_grad: bool, op: Op) -> Var {
        let mut inner = self.inner.borrow_mut();
        debug_assert!(!inner.backward_done, "tape already consumed by backward()");
        inner.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var {
            tape: self.clone(),
            idx: inner.nodes.len() - 1,
        }
    }

    fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }
}

macro_rules! unary_map {
    ($name:ident, $op:ident, $f:expr) => {
        pub fn $name(&self) -> Var {
            let value = self.with_value(|v| v.map($f));
            self.record_unary(value, |i| Op::$op(i))
        }
    };
}

impl Var {
    pub fn shape(&self) -> (usize, usize) {
        self.with_value(|v| v.shape())
    }

    /// Handle to the tape this value is recorded on.
    pub fn tape(&self) -> Tape {
        self.tape.clone()
    }

    /// Clone of the stored value.
    pub fn value(&self) -> Matrix {
        self.with_value(|v| v.clone())
    }

    /// Scalar content of a 1x1 value.
    pub fn scalar(&self) -> Result<f64> {
        let (r, c) = self.shape();
        if (r, c) != (1, 1) {
            return Err(Error::Contract(format!(
                "expected scalar 1x1 value, got {r}x{c}"
            )));
        }
        Ok(self.with_value(|v| v[(0, 0)]))
    }

    /// Accumulated gradient, if any (None before backward or for constants).
    pub fn grad(&self) -> Option<Matrix> {
        self.tape.inner.borrow().nodes[self.idx].grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.inner.borrow().nodes[self.idx].requires_grad
    }

    fn with_value<T>(&self, f: impl FnOnce(&Matrix) -> T) -> T {
        f(&self.tape.inner.borrow().nodes[self.idx].value)
    }

    fn with_two_values<T>(&self, other: &Var, f: impl FnOnce(&Matrix, &Matrix) -> T) -> T {
        let inner = self.tape.inner.borrow();
        f(&inner.nodes[self.idx].value, &inner.nodes[other.idx].value)
    }

    fn record_unary(&self, value: Matrix, op: impl FnOnce(usize) -> Op) -> Var {
        let requires = self.requires_grad();
        self.tape.push(value, requires, op(self.idx))
    }

    fn record_binary(&self, other: &Var, value: Matrix, op: impl FnOnce(usize, usize) -> Op) -> Result<Var> {
        if !self.tape.same_tape(&other.tape) {
            return Err(Error::Contract(
                "operands recorded on different tapes".to_string(),
            ));
        }
        let requires = self.requires_grad() || other.requires_grad();
        Ok(self.tape.push(value, requires, op(self.idx, other.idx)))
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        let value = self.with_two_values(other, |a, b| a.add(b))?;
        self.record_binary(other, value, Op::Add)
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        let value = self.with_two_values(other, |a, b| a.sub(b))?;
        self.record_binary(other, value, Op::Sub)
    }

    pub fn hadamard(&self, other: &Var) -> Result<Var> {
        let value = self.with_two_values(other, |a, b| a.hadamard(b))?;
        self.record_binary(other, value, Op::Hadamard)
    }

    pub fn matmul(&self, other: &Var) -> Result<Var> {
        let value = self.with_two_values(other, |a, b| a.matmul(b))?;
        self.record_binary(other, value, Op::MatMul)
    }

    pub fn scale(&self, c: f64) -> Var {
        let value = self.with_value(|v| v.scale(c));
        self.record_unary(value, |i| Op::Scale(i, c))
    }

    pub fn transpose(&self) -> Var {
        let value = self.with_value(|v| v.transpose());
        self.record_unary(value, Op::Transpose)
    }

    unary_map!(relu, Relu, |x| x.max(0.0));
    unary_map!(sigmoid, Sigmoid, |x| 1.0 / (1.0 + (-x).exp()));
    unary_map!(tanh, Tanh, f64::tanh);
    unary_map!(abs, Abs, f64::abs);

    pub fn leaky_relu(&self, slope: f64) -> Var {
        let value = self.with_value(|v| v.map(|x| if x > 0.0 { x } else { slope * x }));
        self.record_unary(value, |i| Op::LeakyRelu(i, slope))
    }

    pub fn clamp_min(&self, floor: f64) -> Var {
        let value = self.with_value(|v| v.map(|x| x.max(floor)));
        self.record_unary(value, |i| Op::ClampMin(i, floor))
    }

    /// Natural log; non-positive inputs surface as a numeric error.
    pub fn log(&self) -> Result<Var> {
        let value = self.with_value(|v| v.map(f64::ln));
        if !value.all_finite() {
            return Err(Error::Numeric(
                "log produced a non-finite value (non-positive input)".to_string(),
            ));
        }
        Ok(self.record_unary(value, Op::Log))
    }

    /// Exponential; overflow surfaces as a numeric error.
    pub fn exp(&self) -> Result<Var> {
        let value = self.with_value(|v| v.map(f64::exp));
        if !value.all_finite() {
            return Err(Error::Numeric("exp overflowed".to_string()));
        }
        Ok(self.record_unary(value, Op::Exp))
    }

    /// Entrywise square root; negative inputs surface as a numeric error.
    /// The subgradient at 0 is taken as 0.
    pub fn sqrt(&self) -> Result<Var> {
        let value = self.with_value(|v| v.map(f64::sqrt));
        if !value.all_finite() {
            return Err(Error::Numeric(
                "sqrt produced a non-finite value (negative input)".to_string(),
            ));
        }
        Ok(self.record_unary(value, Op::Sqrt))
    }

    /// Softmax over each row.
    pub fn row_softmax(&self) -> Var {
        let value = self.with_value(row_softmax_forward);
        self.record_unary(value, Op::RowSoftmax)
    }

    /// Softmax over the nonzero entries of `mask` in each row; masked-out
    /// positions are exactly zero. Rows with an empty mask stay all-zero.
    pub fn masked_row_softmax(&self, mask: &Matrix) -> Result<Var> {
        let (shape_ok, value) = self.with_value(|v| {
            if v.shape() != mask.shape() {
                (false, Matrix::zeros(0, 0))
            } else {
                (true, masked_row_softmax_forward(v, mask))
            }
        });
        if !shape_ok {
            return Err(Error::dimension(
                "masked_row_softmax",
                format!("{}x{}", self.shape().0, self.shape().1),
                format!("{}x{}", mask.rows(), mask.cols()),
            ));
        }
        let mask = mask.clone();
        Ok(self.record_unary(value, move |i| Op::MaskedRowSoftmax(i, mask)))
    }

    /// Column means: (n x d) -> (1 x d).
    pub fn mean_rows(&self) -> Var {
        let value = self.with_value(|v| {
            let n = v.rows().max(1);
            let mut out = Matrix::zeros(1, v.cols());
            for r in 0..v.rows() {
                for c in 0..v.cols() {
                    out[(0, c)] += v[(r, c)];
                }
            }
            out.scale(1.0 / n as f64)
        });
        self.record_unary(value, Op::MeanRows)
    }

    /// Column sums: (n x d) -> (1 x d).
    pub fn sum_rows(&self) -> Var {
        let value = self.with_value(|v| {
            let mut out = Matrix::zeros(1, v.cols());
            for r in 0..v.rows() {
                for c in 0..v.cols() {
                    out[(0, c)] += v[(r, c)];
                }
            }
            out
        });
        self.record_unary(value, Op::SumRows)
    }

    /// Row sums: (n x d) -> (n x 1).
    pub fn sum_cols(&self) -> Var {
        let value = self.with_value(|v| {
            let mut out = Matrix::zeros(v.rows(), 1);
            for r in 0..v.rows() {
                out[(r, 0)] = v.row(r).iter().sum();
            }
            out
        });
        self.record_unary(value, Op::SumCols)
    }

    /// Mean over all entries -> 1x1.
    pub fn mean_all(&self) -> Var {
        let value = self.with_value(|v| {
            let n = (v.rows() * v.cols()).max(1);
            Matrix::from_vec(1, 1, vec![v.sum() / n as f64]).unwrap()
        });
        self.record_unary(value, Op::MeanAll)
    }

    /// Sum over all entries -> 1x1.
    pub fn sum_all(&self) -> Var {
        let value = self.with_value(|v| Matrix::from_vec(1, 1, vec![v.sum()]).unwrap());
        self.record_unary(value, Op::SumAll)
    }

    /// Broadcast-add a 1xd row vector over every row of self (n x d).
    pub fn add_row(&self, row: &Var) -> Result<Var> {
        let value = self.with_two_values(row, |a, b| -> Result<Matrix> {
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(Error::dimension(
                    "add_row",
                    a.shape_string(),
                    b.shape_string(),
                ));
            }
            let mut out = a.clone();
            for r in 0..a.rows() {
                for c in 0..a.cols() {
                    out[(r, c)] += b[(0, c)];
                }
            }
            Ok(out)
        })?;
        self.record_binary(row, value, Op::AddRow)
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat_cols(&self, other: &Var) -> Result<Var> {
        let value = self.with_two_values(other, |a, b| -> Result<Matrix> {
            if a.rows() != b.rows() {
                return Err(Error::dimension(
                    "concat_cols",
                    a.shape_string(),
                    b.shape_string(),
                ));
            }
            let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
            for r in 0..a.rows() {
                out.row_mut(r)[..a.cols()].copy_from_slice(a.row(r));
                out.row_mut(r)[a.cols()..].copy_from_slice(b.row(r));
            }
            Ok(out)
        })?;
        self.record_binary(other, value, Op::ConcatCols)
    }

    /// Reinterpret the buffer with a new shape of equal element count.
    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Var> {
        let value = self.with_value(|v| -> Result<Matrix> {
            if v.rows() * v.cols() != rows * cols {
                return Err(Error::dimension(
                    "reshape",
                    v.shape_string(),
                    format!("{rows}x{cols}"),
                ));
            }
            Matrix::from_vec(rows, cols, v.data().to_vec())
        })?;
        Ok(self.record_unary(value, Op::Reshape))
    }

    /// Zero the main diagonal of a square value.
    pub fn zero_diag(&self) -> Result<Var> {
        let value = self.with_value(|v| -> Result<Matrix> {
            if !v.is_square() {
                return Err(Error::dimension(
                    "zero_diag",
                    v.shape_string(),
                    "square matrix".to_string(),
                ));
            }
            let mut out = v.clone();
            for i in 0..v.rows() {
                out[(i, i)] = 0.0;
            }
            Ok(out)
        })?;
        Ok(self.record_unary(value, Op::ZeroDiag))
    }

    /// Extract entry (r, c) as a 1x1 value.
    pub fn pick(&self, r: usize, c: usize) -> Result<Var> {
        let (rows, cols) = self.shape();
        if r >= rows || c >= cols {
            return Err(Error::Contract(format!(
                "pick ({r},{c}) out of range for {rows}x{cols}"
            )));
        }
        let value = self.with_value(|v| Matrix::from_vec(1, 1, vec![v[(r, c)]]).unwrap());
        Ok(self.record_unary(value, |i| Op::Pick(i, r, c)))
    }

    /// Batch normalization over the row (node) dimension, one statistic per
    /// column. `gamma`/`beta` are 1xd. In eval mode the provided running
    /// statistics are used and treated as constants.
    pub fn batch_norm(
        &self,
        gamma: &Var,
        beta: &Var,
        running: Option<(&[f64], &[f64])>,
        eps: f64,
    ) -> Result<Var> {
        let (n, d) = self.shape();
        if gamma.shape() != (1, d) || beta.shape() != (1, d) {
            return Err(Error::dimension(
                "batch_norm",
                format!("{n}x{d}"),
                format!("gamma {:?} beta {:?}", gamma.shape(), beta.shape()),
            ));
        }
        if !self.tape.same_tape(&gamma.tape) || !self.tape.same_tape(&beta.tape) {
            return Err(Error::Contract(
                "operands recorded on different tapes".to_string(),
            ));
        }
        let train = running.is_none();
        let x = self.value();
        let (mean, var): (Vec<f64>, Vec<f64>) = match running {
            Some((rm, rv)) => (rm.to_vec(), rv.to_vec()),
            None => {
                let mut mean = vec![0.0; d];
                let mut var = vec![0.0; d];
                for c in 0..d {
                    for r in 0..n {
                        mean[c] += x[(r, c)];
                    }
                    mean[c] /= n as f64;
                    for r in 0..n {
                        var[c] += (x[(r, c)] - mean[c]).powi(2);
                    }
                    var[c] /= n as f64;
                }
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                xhat[(r, c)] = (x[(r, c)] - mean[c]) * inv_std[c];
            }
        }
        let g = gamma.value();
        let b = beta.value();
        let mut out = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                out[(r, c)] = g[(0, c)] * xhat[(r, c)] + b[(0, c)];
            }
        }
        let requires = self.requires_grad() || gamma.requires_grad() || beta.requires_grad();
        let (input, gi, bi) = (self.idx, gamma.idx, beta.idx);
        Ok(self.tape.push(
            out,
            requires,
            Op::BatchNorm {
                input,
                gamma: gi,
                beta: bi,
                xhat,
                inv_std,
                train,
            },
        ))
    }

    /// Reverse pass from a scalar loss. Consumes the tape: no further
    /// operations may be recorded, and backward cannot run twice.
    pub fn backward(&self) -> Result<()> {
        {
            let (r, c) = self.shape();
            if (r, c) != (1, 1) {
                return Err(Error::Contract(format!(
                    "backward requires a scalar 1x1 loss, got {r}x{c}"
                )));
            }
        }
        let mut inner = self.tape.inner.borrow_mut();
        if inner.backward_done {
            return Err(Error::Contract("tape already consumed".to_string()));
        }
        inner.backward_done = true;
        inner.nodes[self.idx].grad = Some(Matrix::from_vec(1, 1, vec![1.0]).unwrap());

        for i in (0..=self.idx).rev() {
            if inner.nodes[i].grad.is_none() || !inner.nodes[i].requires_grad {
                continue;
            }
            let grad = inner.nodes[i].grad.as_ref().unwrap().clone();
            backprop_node(&mut inner.nodes, i, &grad)?;
        }
        Ok(())
    }
}

fn row_softmax_forward(v: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(v.rows(), v.cols());
    for r in 0..v.rows() {
        let row = v.row(r);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let mut denom = 0.0;
        for c in 0..v.cols() {
            let e = (row[c] - max).exp();
            out[(r, c)] = e;
            denom += e;
        }
        for c in 0..v.cols() {
            out[(r, c)] /= denom;
        }
    }
    out
}

fn masked_row_softmax_forward(v: &Matrix, mask: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(v.rows(), v.cols());
    for r in 0..v.rows() {
        let mut max = f64::NEG_INFINITY;
        for c in 0..v.cols() {
            if mask[(r, c)] != 0.0 {
                max = max.max(v[(r, c)]);
            }
        }
        if max == f64::NEG_INFINITY {
            continue; // fully masked row stays zero
        }
        let mut denom = 0.0;
        for c in 0..v.cols() {
            if mask[(r, c)] != 0.0 {
                let e = (v[(r, c)] - max).exp();
                out[(r, c)] = e;
                denom += e;
            }
        }
        for c in 0..v.cols() {
            out[(r, c)] /= denom;
        }
    }
    out
}

fn accumulate(nodes: &mut [Node], idx: usize, delta: Matrix) {
    if !nodes[idx].requires_grad {
        return;
    }
    match &mut nodes[idx].grad {
        Some(g) => {
            let sum = g.add(&delta).expect("gradient shape mismatch");
            *g = sum;
        }
        None => nodes[idx].grad = Some(delta),
    }
}

fn backprop_node(nodes: &mut Vec<Node>, i: usize, g: &Matrix) -> Result<()> {
    // Clone out the small saved pieces we need, then mutate.
    match &nodes[i].op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            let (a, b) = (*a, *b);
            accumulate(nodes, a, g.clone());
            accumulate(nodes, b, g.clone());
        }
        Op::Sub(a, b) => {
            let (a, b) = (*a, *b);
            accumulate(nodes, a, g.clone());
            accumulate(nodes, b, g.scale(-1.0));
        }
        Op::Scale(a, c) => {
            let (a, c) = (*a, *c);
            accumulate(nodes, a, g.scale(c));
        }
        Op::Hadamard(a, b) => {
            let (a, b) = (*a, *b);
            if nodes[a].requires_grad {
                let delta = g.hadamard(&nodes[b].value)?;
                accumulate(nodes, a, delta);
            }
            if nodes[b].requires_grad {
                let delta = g.hadamard(&nodes[a].value)?;
                accumulate(nodes, b, delta);
            }
        }
        Op::MatMul(a, b) => {
            let (a, b) = (*a, *b);
            if nodes[a].requires_grad {
                let delta = g.matmul(&nodes[b].value.transpose())?;
                accumulate(nodes, a, delta);
            }
            if nodes[b].requires_grad {
                let delta = nodes[a].value.transpose().matmul(g)?;
                accumulate(nodes, b, delta);
            }
        }
        Op::Transpose(a) => {
            let a = *a;
            accumulate(nodes, a, g.transpose());
        }
        Op::Relu(a) => {
            let a = *a;
            let mut delta = g.clone();
            for (d, &x) in delta.data_mut().iter_mut().zip(nodes[a].value.data()) {
                if x <= 0.0 {
                    *d = 0.0;
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::LeakyRelu(a, slope) => {
            let (a, slope) = (*a, *slope);
            let mut delta = g.clone();
            for (d, &x) in delta.data_mut().iter_mut().zip(nodes[a].value.data()) {
                if x <= 0.0 {
                    *d *= slope;
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::Sigmoid(a) => {
            let a = *a;
            let y = &nodes[i].value;
            let delta = g.hadamard(&y.map(|s| s * (1.0 - s)))?;
            accumulate(nodes, a, delta);
        }
        Op::Tanh(a) => {
            let a = *a;
            let y = &nodes[i].value;
            let delta = g.hadamard(&y.map(|t| 1.0 - t * t))?;
            accumulate(nodes, a, delta);
        }
        Op::Log(a) => {
            let a = *a;
            let delta = g.hadamard(&nodes[a].value.map(|x| 1.0 / x))?;
            accumulate(nodes, a, delta);
        }
        Op::Exp(a) => {
            let a = *a;
            let delta = g.hadamard(&nodes[i].value)?;
            accumulate(nodes, a, delta);
        }
        Op::Sqrt(a) => {
            let a = *a;
            let y = &nodes[i].value;
            let delta = g.hadamard(&y.map(|s| if s > 0.0 { 0.5 / s } else { 0.0 }))?;
            accumulate(nodes, a, delta);
        }
        Op::Abs(a) => {
            let a = *a;
            let delta = g.hadamard(&nodes[a].value.map(|x| {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }))?;
            accumulate(nodes, a, delta);
        }
        Op::ClampMin(a, floor) => {
            let (a, floor) = (*a, *floor);
            let mut delta = g.clone();
            for (d, &x) in delta.data_mut().iter_mut().zip(nodes[a].value.data()) {
                if x <= floor {
                    *d = 0.0;
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::RowSoftmax(a) => {
            let a = *a;
            let y = nodes[i].value.clone();
            let mut delta = Matrix::zeros(y.rows(), y.cols());
            for r in 0..y.rows() {
                let mut dot = 0.0;
                for c in 0..y.cols() {
                    dot += g[(r, c)] * y[(r, c)];
                }
                for c in 0..y.cols() {
                    delta[(r, c)] = y[(r, c)] * (g[(r, c)] - dot);
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::MaskedRowSoftmax(a, mask) => {
            let a = *a;
            let mask = mask.clone();
            let y = nodes[i].value.clone();
            let mut delta = Matrix::zeros(y.rows(), y.cols());
            for r in 0..y.rows() {
                let mut dot = 0.0;
                for c in 0..y.cols() {
                    if mask[(r, c)] != 0.0 {
                        dot += g[(r, c)] * y[(r, c)];
                    }
                }
                for c in 0..y.cols() {
                    if mask[(r, c)] != 0.0 {
                        delta[(r, c)] = y[(r, c)] * (g[(r, c)] - dot);
                    }
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::MeanRows(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let mut delta = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    delta[(r, c)] = g[(0, c)] / n as f64;
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::SumRows(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let mut delta = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    delta[(r, c)] = g[(0, c)];
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::SumCols(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let mut delta = Matrix::zeros(n, d);
            for r in 0..n {
                for c in 0..d {
                    delta[(r, c)] = g[(r, 0)];
                }
            }
            accumulate(nodes, a, delta);
        }
        Op::MeanAll(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let delta = Matrix::filled(n, d, g[(0, 0)] / (n * d).max(1) as f64);
            accumulate(nodes, a, delta);
        }
        Op::SumAll(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let delta = Matrix::filled(n, d, g[(0, 0)]);
            accumulate(nodes, a, delta);
        }
        Op::AddRow(a, b) => {
            let (a, b) = (*a, *b);
            accumulate(nodes, a, g.clone());
            if nodes[b].requires_grad {
                let mut delta = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        delta[(0, c)] += g[(r, c)];
                    }
                }
                accumulate(nodes, b, delta);
            }
        }
        Op::ConcatCols(a, b) => {
            let (a, b) = (*a, *b);
            let ca = nodes[a].value.cols();
            let cb = nodes[b].value.cols();
            let rows = g.rows();
            let mut da = Matrix::zeros(rows, ca);
            let mut db = Matrix::zeros(rows, cb);
            for r in 0..rows {
                da.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                db.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
            }
            accumulate(nodes, a, da);
            accumulate(nodes, b, db);
        }
        Op::Reshape(a) => {
            let a = *a;
            let (n, d) = nodes[a].value.shape();
            let delta = Matrix::from_vec(n, d, g.data().to_vec())?;
            accumulate(nodes, a, delta);
        }
        Op::ZeroDiag(a) => {
            let a = *a;
            let mut delta = g.clone();
            for i in 0..delta.rows() {
                delta[(i, i)] = 0.0;
            }
            accumulate(nodes, a, delta);
        }
        Op::Pick(a, r, c) => {
            let (a, r, c) = (*a, *r, *c);
            let (n, d) = nodes[a].value.shape();
            let mut delta = Matrix::zeros(n, d);
            delta[(r, c)] = g[(0, 0)];
            accumulate(nodes, a, delta);
        }
        Op::BatchNorm {
            input,
            gamma,
            beta,
            xhat,
            inv_std,
            train,
        } => {
            let (input, gamma, beta, train) = (*input, *gamma, *beta, *train);
            let xhat = xhat.clone();
            let inv_std = inv_std.clone();
            let (n, d) = xhat.shape();
            let gval = nodes[gamma].value.clone();

            if nodes[gamma].requires_grad {
                let mut dg = Matrix::zeros(1, d);
                for r in 0..n {
                    for c in 0..d {
                        dg[(0, c)] += g[(r, c)] * xhat[(r, c)];
                    }
                }
                accumulate(nodes, gamma, dg);
            }
            if nodes[beta].requires_grad {
                let mut db = Matrix::zeros(1, d);
                for r in 0..n {
                    for c in 0..d {
                        db[(0, c)] += g[(r, c)];
                    }
                }
                accumulate(nodes, beta, db);
            }
            if nodes[input].requires_grad {
                let mut dx = Matrix::zeros(n, d);
                if train {
                    // Batch statistics depend on x.
                    for c in 0..d {
                        let mut sum_g = 0.0;
                        let mut sum_gx = 0.0;
                        for r in 0..n {
                            sum_g += g[(r, c)];
                            sum_gx += g[(r, c)] * xhat[(r, c)];
                        }
                        let coeff = gval[(0, c)] * inv_std[c] / n as f64;
                        for r in 0..n {
                            dx[(r, c)] = coeff
                                * (n as f64 * g[(r, c)] - sum_g - xhat[(r, c)] * sum_gx);
                        }
                    }
                } else {
                    // Running statistics are constants: pure affine map.
                    for c in 0..d {
                        let coeff = gval[(0, c)] * inv_std[c];
                        for r in 0..n {
                            dx[(r, c)] = coeff * g[(r, c)];
                        }
                    }
                }
                accumulate(nodes, input, dx);
            }
        }
    }
    Ok(())
}
