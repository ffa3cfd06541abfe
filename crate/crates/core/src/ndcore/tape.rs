//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation eagerly: each call computes its value
//! immediately and appends a node that remembers its inputs. Nodes can only
//! refer to earlier nodes, so the tape is always in topological order and
//! [`Tape::backward`] is a single reverse sweep.
//!
//! ```
//! use ganlab::ndcore::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Matrix::scalar(3.0));
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x).unwrap().item().unwrap(), 6.0);
//! ```
//!
//! Binary elementwise operations broadcast `1 × 1`, `1 × m` and `n × 1`
//! operands against the other side. Parameter leaves are created with
//! [`Tape::param`]; constants created with [`Tape::constant`] never receive
//! gradients, and nothing downstream of constants alone is differentiated.

use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Softplus(Var),
    Powf(Var, f64),
    Abs(Var),
    Step,
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    SumCols(Var),
    BroadcastTo(Var),
    LogSumExpCols(Var),
    SliceCols(Var, usize, usize),
    ConcatCols(Var, Var),
    ConcatRows(Var, Var),
    MinibatchKernel {
        input: Var,
        channels: usize,
        dim: usize,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Softplus(..) => "softplus",
            Op::Powf(..) => "powf",
            Op::Abs(..) => "abs",
            Op::Step => "step",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumRows(..) => "sum_rows",
            Op::SumCols(..) => "sum_cols",
            Op::BroadcastTo(..) => "broadcast",
            Op::LogSumExpCols(..) => "logsumexp",
            Op::SliceCols(..) => "slice_cols",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::MinibatchKernel { .. } => "minibatch_kernel",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
    param: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every parameter leaf.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient for `leaf`; `None` if `leaf` is not a parameter of the tape.
    pub fn wrt(&self, leaf: Var) -> Option<&Matrix> {
        self.grads.get(leaf.0).and_then(Option::as_ref)
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

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push_node(Op::Leaf, value, true, true)
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_node(Op::Leaf, value, false, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Matrix::scalar(value))
    }

    fn push_node(&mut self, op: Op, value: Matrix, requires_grad: bool, param: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
            param,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op, value: Matrix, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_node(op, value, requires_grad, false)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).map(f);
        self.push(op, value, &[a])
    }

    /// Brings `a` and `b` to a common shape, inserting broadcast nodes.
    fn align(&mut self, a: Var, b: Var, op: &'static str) -> Result<(Var, Var)> {
        let (ra, ca) = self.value(a).shape();
        let (rb, cb) = self.value(b).shape();
        if (ra, ca) == (rb, cb) {
            return Ok((a, b));
        }
        let rows = ra.max(rb);
        let cols = ca.max(cb);
        let fits = |r: usize, c: usize| (r == rows || r == 1) && (c == cols || c == 1);
        if !fits(ra, ca) || !fits(rb, cb) {
            return Err(Error::contract(
                op,
                format!("cannot broadcast {ra}x{ca} with {rb}x{cb}"),
            ));
        }
        Ok((
            self.broadcast_to(a, rows, cols)?,
            self.broadcast_to(b, rows, cols)?,
        ))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        make: fn(Var, Var) -> Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (a, b) = self.align(a, b, name)?;
        let value = self.value(a).zip_map(self.value(b), f)?;
        Ok(self.push(make(a, b), value, &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", Op::Add, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", Op::Sub, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", Op::Mul, |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", Op::Div, |x, y| x / y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Scale(a, c), |x| c * x)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, Op::Offset(a), |x| x + c)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value, &[a, b]))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).transpose();
        self.push(Op::Transpose(a), value, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    /// Rectifier with subgradient 0 at the kink.
    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), relu)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    /// Natural log; no clamping happens here.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        self.unary(a, Op::Powf(a, p), |x| x.powf(p))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    /// Heaviside step `[x > 0]`; piecewise constant, so it passes no gradient.
    pub fn step(&mut self, a: Var) -> Var {
        self.unary(a, Op::Step, |x| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value, &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        if self.value(a).is_empty() {
            return Err(Error::contract("mean", "empty operand"));
        }
        let value = Matrix::scalar(self.value(a).mean());
        Ok(self.push(Op::Mean(a), value, &[a]))
    }

    /// Column sums (`n × m → 1 × m`).
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_rows();
        self.push(Op::SumRows(a), value, &[a])
    }

    /// Column means (`n × m → 1 × m`).
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).rows();
        if n == 0 {
            return Err(Error::contract("mean_rows", "empty batch"));
        }
        let s = self.sum_rows(a);
        Ok(self.scale(s, 1.0 / n as f64))
    }

    /// Row sums (`n × m → n × 1`).
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_cols();
        self.push(Op::SumCols(a), value, &[a])
    }

    /// Repeats a `1 × 1`, `1 × m` or `n × 1` operand up to `rows × cols`.
    pub fn broadcast_to(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let src = self.value(a);
        let (r, c) = src.shape();
        if (r, c) == (rows, cols) {
            return Ok(a);
        }
        if !(r == 1 || r == rows) || !(c == 1 || c == cols) {
            return Err(Error::contract(
                "broadcast_to",
                format!("cannot broadcast {r}x{c} to {rows}x{cols}"),
            ));
        }
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out.set(i, j, src.get(if r == 1 { 0 } else { i }, if c == 1 { 0 } else { j }));
            }
        }
        Ok(self.push(Op::BroadcastTo(a), out, &[a]))
    }

    /// Row-wise `log Σ_j exp(a_ij)` (`n × k → n × 1`).
    pub fn logsumexp_cols(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a);
        if m.cols() == 0 {
            return Err(Error::contract("logsumexp_cols", "no columns"));
        }
        let value = Matrix::column(
            (0..m.rows())
                .map(|r| {
                    let row = m.row_slice(r);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
                })
                .collect(),
        );
        Ok(self.push(Op::LogSumExpCols(a), value, &[a]))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let m = self.value(a);
        if start > end || end > m.cols() {
            return Err(Error::contract(
                "slice_cols",
                format!("range {start}..{end} outside {} columns", m.cols()),
            ));
        }
        let mut data = Vec::with_capacity(m.rows() * (end - start));
        for r in 0..m.rows() {
            data.extend_from_slice(&m.row_slice(r)[start..end]);
        }
        let value = Matrix::from_vec(m.rows(), end - start, data)?;
        Ok(self.push(Op::SliceCols(a, start, end), value, &[a]))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, mb) = (self.value(a), self.value(b));
        if ma.rows() != mb.rows() {
            return Err(Error::contract(
                "concat_cols",
                format!("row counts differ: {} vs {}", ma.rows(), mb.rows()),
            ));
        }
        let mut data = Vec::with_capacity(ma.len() + mb.len());
        for r in 0..ma.rows() {
            data.extend_from_slice(ma.row_slice(r));
            data.extend_from_slice(mb.row_slice(r));
        }
        let value = Matrix::from_vec(ma.rows(), ma.cols() + mb.cols(), data)?;
        Ok(self.push(Op::ConcatCols(a, b), value, &[a, b]))
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).vstack(self.value(b))?;
        Ok(self.push(Op::ConcatRows(a, b), value, &[a, b]))
    }

    /// Minibatch closeness features.
    ///
    /// `a` holds `n` rows of `channels · dim` projected codes. For each row
    /// `i` and channel `b` the output is `Σ_j exp(−‖M_ib − M_jb‖₁)` summed
    /// over every row `j` of the batch, `i` included, giving an
    /// `n × channels` matrix.
    pub fn minibatch_kernel(&mut self, a: Var, channels: usize, dim: usize) -> Result<Var> {
        let m = self.value(a);
        if m.rows() == 0 {
            return Err(Error::contract("minibatch_kernel", "batch of size 0"));
        }
        if m.cols() != channels * dim {
            return Err(Error::contract(
                "minibatch_kernel",
                format!("expected {} columns, got {}", channels * dim, m.cols()),
            ));
        }
        let n = m.rows();
        let mut out = Matrix::zeros(n, channels);
        for b in 0..channels {
            for i in 0..n {
                let ri = &m.row_slice(i)[b * dim..(b + 1) * dim];
                let mut acc = 0.0;
                for j in 0..n {
                    let rj = &m.row_slice(j)[b * dim..(b + 1) * dim];
                    let l1: f64 = ri.iter().zip(rj).map(|(x, y)| (x - y).abs()).sum();
                    acc += (-l1).exp();
                }
                out.set(i, b, acc);
            }
        }
        Ok(self.push(
            Op::MinibatchKernel {
                input: a,
                channels,
                dim,
            },
            out,
            &[a],
        ))
    }

    /// Gradients of the scalar `output` with respect to every parameter leaf.
    ///
    /// The tape itself is not modified, so `backward` can be called again.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out_node = &self.nodes[output.0];
        if out_node.value.shape() != (1, 1) {
            let (r, c) = out_node.value.shape();
            return Err(Error::contract(
                "backward",
                format!("output must be 1x1, got {r}x{c}"),
            ));
        }
        // The earliest non-finite value is the one worth naming.
        if let Some((i, node)) = self.nodes[..=output.0]
            .iter()
            .enumerate()
            .find(|(_, n)| n.requires_grad && !n.value.is_finite())
        {
            return Err(Error::NumericFault {
                node: i,
                op: node.op.name(),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::scalar(1.0));

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if !g.is_finite() {
                return Err(Error::NumericFault {
                    node: i,
                    op: node.op.name(),
                });
            }
            if node.param {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
        }

        grads.resize(self.nodes.len(), None);
        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| {
                node.param.then(|| {
                    g.unwrap_or_else(|| Matrix::zeros(node.value.rows(), node.value.cols()))
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Matrix>], v: Var, g: Matrix) -> Result<()> {
        if !self.nodes[v.0].requires_grad {
            return Ok(());
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g)?,
            slot @ None => *slot = Some(g),
        }
        Ok(())
    }

    fn propagate(
        &self,
        op: &Op,
        y: &Matrix,
        g: &Matrix,
        grads: &mut [Option<Matrix>],
    ) -> Result<()> {
        let val = |v: Var| &self.nodes[v.0].value;
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone())?;
                self.accumulate(grads, b, g.clone())?;
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone())?;
                self.accumulate(grads, b, g.map(|x| -x))?;
            }
            Op::Mul(a, b) => {
                self.accumulate(grads, a, g.zip_map(val(b), |g, y| g * y)?)?;
                self.accumulate(grads, b, g.zip_map(val(a), |g, x| g * x)?)?;
            }
            Op::Div(a, b) => {
                self.accumulate(grads, a, g.zip_map(val(b), |g, y| g / y)?)?;
                let ga = g.zip_map(val(a), |g, x| g * x)?;
                self.accumulate(grads, b, ga.zip_map(val(b), |gx, y| -gx / (y * y))?)?;
            }
            Op::Scale(a, c) => self.accumulate(grads, a, g.map(|x| c * x))?,
            Op::Offset(a) => self.accumulate(grads, a, g.clone())?,
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    self.accumulate(grads, a, g.gemm(false, val(b), true)?)?;
                }
                if self.nodes[b.0].requires_grad {
                    self.accumulate(grads, b, val(a).gemm(true, g, false)?)?;
                }
            }
            Op::Transpose(a) => self.accumulate(grads, a, g.transpose())?,
            Op::Sigmoid(a) => self.accumulate(grads, a, g.zip_map(y, |g, s| g * s * (1.0 - s))?)?,
            Op::Tanh(a) => self.accumulate(grads, a, g.zip_map(y, |g, t| g * (1.0 - t * t))?)?,
            Op::Relu(a) => self.accumulate(
                grads,
                a,
                g.zip_map(val(a), |g, x| if x > 0.0 { g } else { 0.0 })?,
            )?,
            Op::Exp(a) => self.accumulate(grads, a, g.zip_map(y, |g, e| g * e)?)?,
            Op::Log(a) => self.accumulate(grads, a, g.zip_map(val(a), |g, x| g / x)?)?,
            Op::Softplus(a) => {
                self.accumulate(grads, a, g.zip_map(val(a), |g, x| g * sigmoid(x))?)?
            }
            Op::Powf(a, p) => self.accumulate(
                grads,
                a,
                g.zip_map(val(a), |g, x| g * p * x.powf(p - 1.0))?,
            )?,
            Op::Abs(a) => self.accumulate(grads, a, g.zip_map(val(a), |g, x| g * sign(x))?)?,
            Op::Step => {}
            Op::Sum(a) => {
                let (r, c) = val(a).shape();
                self.accumulate(grads, a, Matrix::filled(r, c, g.item()?))?;
            }
            Op::Mean(a) => {
                let (r, c) = val(a).shape();
                self.accumulate(grads, a, Matrix::filled(r, c, g.item()? / (r * c) as f64))?;
            }
            Op::SumRows(a) => {
                let (r, c) = val(a).shape();
                let mut out = Matrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        out.set(i, j, g.get(0, j));
                    }
                }
                self.accumulate(grads, a, out)?;
            }
            Op::SumCols(a) => {
                let (r, c) = val(a).shape();
                let mut out = Matrix::zeros(r, c);
                for i in 0..r {
                    for j in 0..c {
                        out.set(i, j, g.get(i, 0));
                    }
                }
                self.accumulate(grads, a, out)?;
            }
            Op::BroadcastTo(a) => {
                let (r, c) = val(a).shape();
                let reduced = match (r == 1, c == 1) {
                    (true, true) => Matrix::scalar(g.sum()),
                    (true, false) => g.sum_rows(),
                    (false, true) => g.sum_cols(),
                    (false, false) => g.clone(),
                };
                self.accumulate(grads, a, reduced)?;
            }
            Op::LogSumExpCols(a) => {
                let x = val(a);
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    for j in 0..x.cols() {
                        out.set(i, j, g.get(i, 0) * (x.get(i, j) - y.get(i, 0)).exp());
                    }
                }
                self.accumulate(grads, a, out)?;
            }
            Op::SliceCols(a, start, end) => {
                let (r, c) = val(a).shape();
                let mut out = Matrix::zeros(r, c);
                for i in 0..r {
                    for j in start..end {
                        out.set(i, j, g.get(i, j - start));
                    }
                }
                self.accumulate(grads, a, out)?;
            }
            Op::ConcatCols(a, b) => {
                let ca = val(a).cols();
                let cb = val(b).cols();
                let r = g.rows();
                let mut ga = Matrix::zeros(r, ca);
                let mut gb = Matrix::zeros(r, cb);
                for i in 0..r {
                    for j in 0..ca {
                        ga.set(i, j, g.get(i, j));
                    }
                    for j in 0..cb {
                        gb.set(i, j, g.get(i, ca + j));
                    }
                }
                self.accumulate(grads, a, ga)?;
                self.accumulate(grads, b, gb)?;
            }
            Op::ConcatRows(a, b) => {
                let ra = val(a).rows();
                let c = g.cols();
                let top = Matrix::from_vec(ra, c, g.as_slice()[..ra * c].to_vec())?;
                let bottom =
                    Matrix::from_vec(g.rows() - ra, c, g.as_slice()[ra * c..].to_vec())?;
                self.accumulate(grads, a, top)?;
                self.accumulate(grads, b, bottom)?;
            }
            Op::MinibatchKernel {
                input,
                channels,
                dim,
            } => {
                let m = val(input);
                let n = m.rows();
                let mut out = Matrix::zeros(n, m.cols());
                for b in 0..channels {
                    let cols = b * dim..(b + 1) * dim;
                    for i in 0..n {
                        for j in (i + 1)..n {
                            let ri = &m.row_slice(i)[cols.clone()];
                            let rj = &m.row_slice(j)[cols.clone()];
                            let l1: f64 = ri.iter().zip(rj).map(|(x, y)| (x - y).abs()).sum();
                            // K_ij appears in both o_i and o_j.
                            let w = (g.get(i, b) + g.get(j, b)) * (-l1).exp();
                            for c in 0..dim {
                                let s = sign(ri[c] - rj[c]);
                                let col = b * dim + c;
                                out.set(i, col, out.get(i, col) - w * s);
                                out.set(j, col, out.get(j, col) + w * s);
                            }
                        }
                    }
                }
                self.accumulate(grads, input, out)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(3.0));
        let y = t.mul(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().item().unwrap(), 6.0);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(0.0));
        let y = t.sigmoid(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().item().unwrap(), 0.25);
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(0.0));
        let y = t.relu(x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::new();
        let x = t.param(Matrix::zeros(2, 1));
        let err = t.backward(x).unwrap_err();
        assert!(matches!(err, Error::Contract { op: "backward", .. }));
    }

    #[test]
    fn nan_reports_the_node() {
        let mut t = Tape::new();
        let x = t.param(Matrix::scalar(-1.0));
        let y = t.log(x);
        let s = t.sum(y);
        match t.backward(s).unwrap_err() {
            Error::NumericFault { node, op } => {
                assert_eq!(node, y.index());
                assert_eq!(op, "log");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_is_reentrant() {
        let mut t = Tape::new();
        let x = t.param(Matrix::row(vec![0.3, -1.2, 2.0]));
        let e = t.tanh(x);
        let p = t.mul(e, x).unwrap();
        let s = t.mean(p).unwrap();
        let g1 = t.backward(s).unwrap();
        let g2 = t.backward(s).unwrap();
        assert_eq!(g1.wrt(x), g2.wrt(x));
    }

    #[test]
    fn broadcasting_sums_gradients_back() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::from_vec(3, 2, vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let b = t.param(Matrix::row(vec![0.0, 0.0]));
        let y = t.add(x, b).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(b).unwrap().as_slice(), &[3.0, 3.0]);
        assert!(g.wrt(x).is_none());
    }

    #[test]
    fn unreached_params_get_zero_gradient() {
        let mut t = Tape::new();
        let a = t.param(Matrix::scalar(1.0));
        let b = t.param(Matrix::row(vec![1.0, 2.0]));
        let y = t.scale(a, 2.0);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(b).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn minibatch_kernel_identical_rows() {
        let mut t = Tape::new();
        let m = t.constant(Matrix::filled(4, 6, 0.7));
        let o = t.minibatch_kernel(m, 2, 3).unwrap();
        assert_eq!(t.value(o).as_slice(), &[4.0; 8]);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
