//! Reverse-mode differentiation over a linear record of matrix operations.
//!
//! Every operation appends one node holding its output value. `backward`
//! walks the nodes from the loss towards the front, so each node is visited
//! exactly once, after every node that consumed it.

use super::param::{ParamId, ParamSet};
use super::tensor::{gemm, MatRef};
use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation output `y`.
    /// `relu'(0)` is 0.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Probability floor used by the cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddColumn(Var, Var),
    AddRow(Var, Var),
    Activation(Var, Activation),
    Transpose(Var),
    Softmax(Var),
    MeanColumns(Var),
    ConcatColumns(Vec<Var>),
    Column(Var, usize),
    Embed(Var, Vec<usize>),
    NegLogPick {
        probs: Var,
        index: usize,
        clamped: bool,
    },
    Sum(Var),
    Scale(Var, f64),
    Gru(Box<GruRecord>),
}

/// Inputs and per-step gate activations of a fused GRU recurrence.
#[derive(Debug, Clone)]
struct GruRecord {
    xz: Var,
    xr: Var,
    xc: Var,
    uz: Var,
    ur: Var,
    uc: Var,
    /// `d×T` update, reset and candidate activations.
    z: Tensor,
    r: Tensor,
    c: Tensor,
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    /// False when no parameter is upstream of this node.
    needs_grad: bool,
}

/// Operation record for one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            recording: true,
        }
    }

    /// A tape that keeps values but drops operation history; `backward` on it
    /// fails. Used for inference.
    pub fn inference() -> Self {
        Tape {
            nodes: Vec::new(),
            recording: false,
        }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let op = if self.recording { op } else { Op::Constant };
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddColumn(a, b)
            | Op::AddRow(a, b) => self.needs(*a) || self.needs(*b),
            Op::Activation(a, _)
            | Op::Transpose(a)
            | Op::Softmax(a)
            | Op::MeanColumns(a)
            | Op::Column(a, _)
            | Op::Embed(a, _)
            | Op::Sum(a)
            | Op::Scale(a, _)
            | Op::NegLogPick { probs: a, .. } => self.needs(*a),
            Op::ConcatColumns(parts) => parts.iter().any(|&p| self.needs(p)),
            Op::Gru(g) => [g.xz, g.xr, g.xc, g.uz, g.ur, g.uc]
                .iter()
                .any(|&v| self.needs(v)),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    /// Registers a parameter as a leaf. Gradients reaching it are added to
    /// the parameter's gradient buffer during `backward`.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = ta.matmul(tb)?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa,
                rhs: sb,
            });
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(ta.rows(), ta.cols(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    /// `a[p×q] + b[p×1]`, the bias column added to every column of `a`.
    pub fn add_column(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb != [sa[0], 1] {
            return Err(Error::ShapeMismatch {
                op: "add_column",
                lhs: sa,
                rhs: sb,
            });
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let out = Tensor::from_fn(sa[0], sa[1], |r, c| ta.get(r, c) + tb.get(r, 0));
        Ok(self.push(out, Op::AddColumn(a, b)))
    }

    /// `a[p×q] + b[1×q]`, the bias row added to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb != [1, sa[1]] {
            return Err(Error::ShapeMismatch {
                op: "add_row",
                lhs: sa,
                rhs: sb,
            });
        }
        let (ta, tb) = (self.value(a), self.value(b));
        let out = Tensor::from_fn(sa[0], sa[1], |r, c| ta.get(r, c) + tb.get(0, c));
        Ok(self.push(out, Op::AddRow(a, b)))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let out = self.value(a).map(|x| kind.apply(x));
        self.push(out, Op::Activation(a, kind))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Relu)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.activation(a, Activation::Sigmoid)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    /// Softmax over a `1×m` row vector.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let s = self.shape(a);
        if s[0] != 1 {
            return Err(Error::ShapeMismatch {
                op: "softmax",
                lhs: s,
                rhs: [1, s[1]],
            });
        }
        let out = Tensor::row(softmax(self.value(a).data()));
        Ok(self.push(out, Op::Softmax(a)))
    }

    /// Column-wise mean: `d×n -> d×1`.
    pub fn mean_columns(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = t.cols() as f64;
        let out = Tensor::from_fn(t.rows(), 1, |r, _| t.row_slice(r).iter().sum::<f64>() / n);
        self.push(out, Op::MeanColumns(a))
    }

    /// Concatenates row vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if let Some(&bad) = parts.iter().find(|&&p| self.shape(p)[0] != 1) {
            let s = self.shape(bad);
            return Err(Error::ShapeMismatch {
                op: "concat",
                lhs: s,
                rhs: [1, s[1]],
            });
        }
        self.concat_columns(parts)
    }

    /// Places blocks with equal row counts side by side.
    pub fn concat_columns(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::InvalidInput("concat of an empty list".into()))?;
        let rows = self.shape(first)[0];
        for &p in parts {
            if self.shape(p)[0] != rows {
                return Err(Error::ShapeMismatch {
                    op: "concat_columns",
                    lhs: self.shape(first),
                    rhs: self.shape(p),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p)[1]).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(rows, cols, data)?;
        Ok(self.push(out, Op::ConcatColumns(parts.to_vec())))
    }

    /// Column `j` of `a` as a `p×1` tensor.
    pub fn column(&mut self, a: Var, j: usize) -> Result<Var> {
        let t = self.value(a);
        if j >= t.cols() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: t.cols(),
            });
        }
        let out = Tensor::column(t.column_values(j));
        Ok(self.push(out, Op::Column(a, j)))
    }

    /// Row lookup: `table[V×d]` and `m` indices give `d×m` whose column `t`
    /// is row `indices[t]` of the table.
    pub fn embed(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let t = self.value(table);
        if indices.is_empty() {
            return Err(Error::InvalidInput(
                "embedding lookup with no indices".into(),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= t.rows()) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: t.rows(),
            });
        }
        let out = Tensor::from_fn(t.cols(), indices.len(), |r, c| t.get(indices[c], r));
        Ok(self.push(out, Op::Embed(table, indices.to_vec())))
    }

    /// `-ln(clamp(probs[index]))` for a row of probabilities.
    pub fn neg_log_pick(&mut self, probs: Var, index: usize) -> Result<Var> {
        let t = self.value(probs);
        if t.rows() != 1 || index >= t.cols() {
            return Err(Error::IndexOutOfRange {
                index,
                len: t.cols(),
            });
        }
        let p = t.get(0, index);
        let clamped = !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p);
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        Ok(self.push(
            Tensor::scalar(-p.ln()),
            Op::NegLogPick {
                probs,
                index,
                clamped,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, Op::Sum(a))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).scale(factor);
        self.push(out, Op::Scale(a, factor))
    }

    /// GRU recurrence over precomputed input projections (`d×T` each, biases
    /// included) with recurrent weights `U_z, U_r, U_c` (`d×d`), from `h₀ = 0`:
    ///
    /// ```text
    /// z = σ(xz_t + U_z h),  r = σ(xr_t + U_r h),  c = tanh(xc_t + U_c (r ⊙ h))
    /// h ← h + z ⊙ (c − h)
    /// ```
    ///
    /// Returns the `d×T` matrix of states.
    #[allow(clippy::needless_range_loop)]
    pub fn gru_recurrence(
        &mut self,
        xz: Var,
        xr: Var,
        xc: Var,
        uz: Var,
        ur: Var,
        uc: Var,
    ) -> Result<Var> {
        let [d, steps] = self.shape(xz);
        for (v, want) in [
            (xr, [d, steps]),
            (xc, [d, steps]),
            (uz, [d, d]),
            (ur, [d, d]),
            (uc, [d, d]),
        ] {
            if self.shape(v) != want {
                return Err(Error::ShapeMismatch {
                    op: "gru_recurrence",
                    lhs: want,
                    rhs: self.shape(v),
                });
            }
        }
        let (txz, txr, txc) = (self.value(xz), self.value(xr), self.value(xc));
        let (tuz, tur, tuc) = (self.value(uz), self.value(ur), self.value(uc));
        let mut z = Tensor::zeros(d, steps);
        let mut r = Tensor::zeros(d, steps);
        let mut c = Tensor::zeros(d, steps);
        let mut states = Tensor::zeros(d, steps);
        let mut h = vec![0.0; d];
        let mut gated = vec![0.0; d];
        let dot = |w: &Tensor, i: usize, v: &[f64]| {
            w.row_slice(i)
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        for t in 0..steps {
            for i in 0..d {
                z.set(i, t, sigmoid(txz.get(i, t) + dot(tuz, i, &h)));
                r.set(i, t, sigmoid(txr.get(i, t) + dot(tur, i, &h)));
            }
            for i in 0..d {
                gated[i] = r.get(i, t) * h[i];
            }
            for i in 0..d {
                c.set(i, t, (txc.get(i, t) + dot(tuc, i, &gated)).tanh());
            }
            for i in 0..d {
                h[i] += z.get(i, t) * (c.get(i, t) - h[i]);
                states.set(i, t, h[i]);
            }
        }
        let record = GruRecord {
            xz,
            xr,
            xc,
            uz,
            ur,
            uc,
            z,
            r,
            c,
        };
        Ok(self.push(states, Op::Gru(Box::new(record))))
    }

    /// Accumulates `d loss / d param` into each reachable parameter's gradient.
    pub fn backward(&self, loss: Var, params: &mut ParamSet) -> Result<()> {
        self.backward_scaled(loss, params, 1.0)
    }

    /// Like [`Tape::backward`], with the seed gradient set to `scale`
    /// (e.g. `1/B` to average over a batch).
    pub fn backward_scaled(&self, loss: Var, params: &mut ParamSet, scale: f64) -> Result<()> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::NonScalarLoss(shape));
        }
        if !self.recording {
            return Err(Error::InvalidInput(
                "backward on a tape that did not record operations".into(),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(scale));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => params.get_mut(*id).grad.add_scaled(&g, 1.0),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    if self.needs(*a) {
                        let da = self.slot(&mut grads, *a);
                        gemm(MatRef::new(&g), MatRef::new(tb).t(), da, 1.0, 1.0);
                    }
                    if self.needs(*b) {
                        let db = self.slot(&mut grads, *b);
                        gemm(MatRef::new(ta).t(), MatRef::new(&g), db, 1.0, 1.0);
                    }
                }
                Op::Add(a, b) => {
                    self.slot(&mut grads, *a).add_scaled(&g, 1.0);
                    self.slot(&mut grads, *b).add_scaled(&g, 1.0);
                }
                Op::Sub(a, b) => {
                    self.slot(&mut grads, *a).add_scaled(&g, 1.0);
                    self.slot(&mut grads, *b).add_scaled(&g, -1.0);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let da = self.slot(&mut grads, *a);
                    for ((d, gv), bv) in da.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                        *d += gv * bv;
                    }
                    let db = self.slot(&mut grads, *b);
                    for ((d, gv), av) in db.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                        *d += gv * av;
                    }
                }
                Op::AddColumn(a, b) => {
                    self.slot(&mut grads, *a).add_scaled(&g, 1.0);
                    let db = self.slot(&mut grads, *b);
                    for r in 0..g.rows() {
                        db.data_mut()[r] += g.row_slice(r).iter().sum::<f64>();
                    }
                }
                Op::AddRow(a, b) => {
                    self.slot(&mut grads, *a).add_scaled(&g, 1.0);
                    let db = self.slot(&mut grads, *b);
                    for r in 0..g.rows() {
                        for (d, gv) in db.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *d += gv;
                        }
                    }
                }
                Op::Activation(a, kind) => {
                    let da = self.slot(&mut grads, *a);
                    for ((d, gv), y) in da
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(node.value.data())
                    {
                        *d += gv * kind.derivative_from_output(*y);
                    }
                }
                Op::Transpose(a) => {
                    let gt = g.transpose();
                    self.slot(&mut grads, *a).add_scaled(&gt, 1.0);
                }
                Op::Softmax(a) => {
                    let y = node.value.data();
                    let dot: f64 = g.data().iter().zip(y).map(|(gv, yv)| gv * yv).sum();
                    let da = self.slot(&mut grads, *a);
                    for ((d, gv), yv) in da.data_mut().iter_mut().zip(g.data()).zip(y) {
                        *d += yv * (gv - dot);
                    }
                }
                Op::MeanColumns(a) => {
                    let da = self.slot(&mut grads, *a);
                    let n = da.cols();
                    for r in 0..da.rows() {
                        let share = g.get(r, 0) / n as f64;
                        for c in 0..n {
                            da.data_mut()[r * n + c] += share;
                        }
                    }
                }
                Op::ConcatColumns(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let dp = self.slot(&mut grads, p);
                        let w = dp.cols();
                        for r in 0..dp.rows() {
                            let src = &g.row_slice(r)[offset..offset + w];
                            for (d, s) in dp.data_mut()[r * w..(r + 1) * w].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                        offset += w;
                    }
                }
                Op::Column(a, j) => {
                    let da = self.slot(&mut grads, *a);
                    let cols = da.cols();
                    for r in 0..da.rows() {
                        da.data_mut()[r * cols + j] += g.get(r, 0);
                    }
                }
                Op::Embed(table, indices) => {
                    let dt = self.slot(&mut grads, *table);
                    let d = dt.cols();
                    for (t, &idx) in indices.iter().enumerate() {
                        for r in 0..d {
                            dt.data_mut()[idx * d + r] += g.get(r, t);
                        }
                    }
                }
                Op::NegLogPick {
                    probs,
                    index,
                    clamped,
                } => {
                    if !clamped {
                        let p = self.value(*probs).get(0, *index);
                        let dp = self.slot(&mut grads, *probs);
                        dp.data_mut()[*index] -= g.item() / p;
                    }
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    self.slot(&mut grads, *a)
                        .data_mut()
                        .iter_mut()
                        .for_each(|d| *d += gv);
                }
                Op::Scale(a, factor) => {
                    self.slot(&mut grads, *a).add_scaled(&g, *factor);
                }
                Op::Gru(rec) => self.gru_backward(rec, &node.value, &g, &mut grads),
            }
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    fn gru_backward(
        &self,
        rec: &GruRecord,
        states: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) {
        let [d, steps] = states.shape();
        let (z, r, c) = (&rec.z, &rec.r, &rec.c);
        let (tuz, tur, tuc) = (self.value(rec.uz), self.value(rec.ur), self.value(rec.uc));
        let mut dxz = Tensor::zeros(d, steps);
        let mut dxr = Tensor::zeros(d, steps);
        let mut dxc = Tensor::zeros(d, steps);
        let mut duz = Tensor::zeros(d, d);
        let mut dur = Tensor::zeros(d, d);
        let mut duc = Tensor::zeros(d, d);
        let mut dh_next = vec![0.0; d];
        let mut h_prev = vec![0.0; d];
        let mut dh_prev = vec![0.0; d];
        let mut gated = vec![0.0; d];
        let mut dgated = vec![0.0; d];
        for t in (0..steps).rev() {
            for i in 0..d {
                h_prev[i] = if t == 0 { 0.0 } else { states.get(i, t - 1) };
                gated[i] = r.get(i, t) * h_prev[i];
            }
            for i in 0..d {
                let dh = g.get(i, t) + dh_next[i];
                let (zi, ci) = (z.get(i, t), c.get(i, t));
                dxz.set(i, t, dh * (ci - h_prev[i]) * zi * (1.0 - zi));
                dxc.set(i, t, dh * zi * (1.0 - ci * ci));
                dh_prev[i] = dh * (1.0 - zi);
            }
            dgated.fill(0.0);
            for i in 0..d {
                let dc = dxc.get(i, t);
                for (j, w) in tuc.row_slice(i).iter().enumerate() {
                    dgated[j] += w * dc;
                }
            }
            for i in 0..d {
                let ri = r.get(i, t);
                dh_prev[i] += dgated[i] * ri;
                dxr.set(i, t, dgated[i] * h_prev[i] * ri * (1.0 - ri));
            }
            for i in 0..d {
                let (dzi, dri, dci) = (dxz.get(i, t), dxr.get(i, t), dxc.get(i, t));
                for j in 0..d {
                    dh_prev[j] += tuz.get(i, j) * dzi + tur.get(i, j) * dri;
                }
                for (w, h) in duz.row_slice_mut(i).iter_mut().zip(&h_prev) {
                    *w += dzi * h;
                }
                for (w, h) in dur.row_slice_mut(i).iter_mut().zip(&h_prev) {
                    *w += dri * h;
                }
                for (w, h) in duc.row_slice_mut(i).iter_mut().zip(&gated) {
                    *w += dci * h;
                }
            }
            std::mem::swap(&mut dh_next, &mut dh_prev);
        }
        for (v, grad) in [
            (rec.xz, dxz),
            (rec.xr, dxr),
            (rec.xc, dxc),
            (rec.uz, duz),
            (rec.ur, dur),
            (rec.uc, duc),
        ] {
            if self.needs(v) {
                self.slot(grads, v).add_scaled(&grad, 1.0);
            }
        }
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Tensor>], v: Var) -> &'g mut Tensor {
        let [r, c] = self.shape(v);
        grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c))
    }
}
