//! Central-difference checking of tape gradients, and random composed
//! graphs to run it on.

use rand::Rng as _;

use super::{Matrix, Tape, Var};
use crate::distributions::{fill_standard_normal, Rng};
use crate::error::{Error, Result};

/// Default finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of [`relative_error`], so entries that are zero both
/// ways compare on absolute error.
pub const REL_FLOOR: f64 = 1e-6;
/// Kink inputs closer than this to zero make a graph ineligible.
pub const KINK_MARGIN: f64 = 1e-3;

/// `|a − b| / max(|a|, |b|, REL_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Largest relative error between reverse-mode gradients of `f` at
/// `inputs` and central differences with step `h`, over every input entry.
pub fn check_gradients<F>(inputs: &[Matrix], h: f64, f: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::contract("check_gradients", "step must be positive"));
    }
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let eval = |values: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|m| t.constant(m.clone())).collect();
        let o = f(&mut t, &vs)?;
        t.scalar_value(o)
    };

    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v).cloned().unwrap_or_else(|| Matrix::zeros(inputs[i].rows(), inputs[i].cols()));
        for k in 0..inputs[i].len() {
            let x0 = inputs[i].as_slice()[k];
            probe[i].as_mut_slice()[k] = x0 + h;
            let up = eval(&probe)?;
            probe[i].as_mut_slice()[k] = x0 - h;
            let down = eval(&probe)?;
            probe[i].as_mut_slice()[k] = x0;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(analytic.as_slice()[k], numeric));
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unary {
    Tanh,
    Sigmoid,
    Softplus,
    HalfExp,
    Square,
    Relu,
    Abs,
    LogSigmoid,
    MeanRows,
    SumCols,
    LogSumExp,
    Transpose,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    /// `a / (1 + b²)`.
    SoftDiv,
    Matmul,
    /// `a · bᵀ`.
    MatmulT,
    ConcatCols,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Unary(Unary, usize),
    Binary(Binary, usize, usize),
}

/// A random scalar function of a few small matrices, built from the tape's
/// elementwise, reduction and matrix primitives.
#[derive(Clone, Debug)]
pub struct RandomGraph {
    pub inputs: Vec<Matrix>,
    nodes: Vec<Node>,
}

impl RandomGraph {
    /// Draws inputs and between 3 and 11 operations. Graphs whose relu or
    /// abs inputs land within [`KINK_MARGIN`] of zero are redrawn.
    pub fn generate(rng: &mut Rng) -> Result<Self> {
        loop {
            let g = Self::draw(rng);
            if g.min_kink_distance()? > KINK_MARGIN {
                return Ok(g);
            }
        }
    }

    fn draw(rng: &mut Rng) -> Self {
        let n_inputs = rng.gen_range(1..=3);
        let mut shapes: Vec<(usize, usize)> = Vec::new();
        let mut inputs = Vec::new();
        for _ in 0..n_inputs {
            let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
            let mut data = vec![0.0; r * c];
            fill_standard_normal(rng, &mut data);
            inputs.push(Matrix::from_vec(r, c, data).expect("sized"));
            shapes.push((r, c));
        }
        let mut nodes = Vec::new();
        let n_ops = rng.gen_range(3..=11);
        while nodes.len() < n_ops {
            let a = rng.gen_range(0..shapes.len());
            let b = rng.gen_range(0..shapes.len());
            let (sa, sb) = (shapes[a], shapes[b]);
            let pick = if rng.gen_bool(0.55) {
                let op = [
                    Unary::Tanh,
                    Unary::Sigmoid,
                    Unary::Softplus,
                    Unary::HalfExp,
                    Unary::Square,
                    Unary::Relu,
                    Unary::Abs,
                    Unary::LogSigmoid,
                    Unary::MeanRows,
                    Unary::SumCols,
                    Unary::LogSumExp,
                    Unary::Transpose,
                ][rng.gen_range(0..12)];
                let shape = match op {
                    Unary::MeanRows => (1, sa.1),
                    Unary::SumCols | Unary::LogSumExp => (sa.0, 1),
                    Unary::Transpose => (sa.1, sa.0),
                    _ => sa,
                };
                Some((Node::Unary(op, a), shape))
            } else {
                let op = [
                    Binary::Add,
                    Binary::Sub,
                    Binary::Mul,
                    Binary::SoftDiv,
                    Binary::Matmul,
                    Binary::MatmulT,
                    Binary::ConcatCols,
                ][rng.gen_range(0..7)];
                match op {
                    Binary::Add | Binary::Sub | Binary::Mul | Binary::SoftDiv if sa == sb => {
                        Some((Node::Binary(op, a, b), sa))
                    }
                    Binary::Matmul if sa.1 == sb.0 => Some((Node::Binary(op, a, b), (sa.0, sb.1))),
                    Binary::MatmulT if sa.1 == sb.1 => Some((Node::Binary(op, a, b), (sa.0, sb.0))),
                    Binary::ConcatCols if sa.0 == sb.0 && sa.1 + sb.1 <= 8 => {
                        Some((Node::Binary(op, a, b), (sa.0, sa.1 + sb.1)))
                    }
                    _ => None,
                }
            };
            if let Some((node, shape)) = pick {
                nodes.push(node);
                shapes.push(shape);
            }
        }
        RandomGraph { inputs, nodes }
    }

    /// Number of primitive operations, excluding the final reduction.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Builds the graph; the output is the sum of every intermediate node's
    /// mean, so each operation reaches the loss.
    pub fn build(&self, tape: &mut Tape, vars: &[Var]) -> Result<Var> {
        Ok(self.build_nodes(tape, vars)?.1)
    }

    fn build_nodes(&self, tape: &mut Tape, vars: &[Var]) -> Result<(Vec<Var>, Var)> {
        let mut pool: Vec<Var> = vars.to_vec();
        for node in &self.nodes {
            let v = match *node {
                Node::Unary(op, a) => {
                    let x = pool[a];
                    match op {
                        Unary::Tanh => tape.tanh(x),
                        Unary::Sigmoid => tape.sigmoid(x),
                        Unary::Softplus => tape.softplus(x),
                        Unary::HalfExp => {
                            let h = tape.scale(x, 0.5);
                            tape.exp(h)
                        }
                        Unary::Square => tape.square(x)?,
                        Unary::Relu => tape.relu(x),
                        Unary::Abs => tape.abs(x),
                        Unary::LogSigmoid => {
                            let s = tape.sigmoid(x);
                            tape.log(s)
                        }
                        Unary::MeanRows => tape.mean_rows(x)?,
                        Unary::SumCols => tape.sum_cols(x),
                        Unary::LogSumExp => tape.logsumexp_cols(x)?,
                        Unary::Transpose => tape.transpose(x),
                    }
                }
                Node::Binary(op, a, b) => {
                    let (x, y) = (pool[a], pool[b]);
                    match op {
                        Binary::Add => tape.add(x, y)?,
                        Binary::Sub => tape.sub(x, y)?,
                        Binary::Mul => tape.mul(x, y)?,
                        Binary::SoftDiv => {
                            let sq = tape.square(y)?;
                            let d = tape.offset(sq, 1.0);
                            tape.div(x, d)?
                        }
                        Binary::Matmul => tape.matmul(x, y)?,
                        Binary::MatmulT => {
                            let t = tape.transpose(y);
                            tape.matmul(x, t)?
                        }
                        Binary::ConcatCols => tape.concat_cols(x, y)?,
                    }
                }
            };
            pool.push(v);
        }
        let mut total: Option<Var> = None;
        for &v in &pool[vars.len()..] {
            let m = tape.mean(v)?;
            total = Some(match total {
                Some(t) => tape.add(t, m)?,
                None => m,
            });
        }
        Ok((pool, total.expect("at least one operation")))
    }

    fn min_kink_distance(&self) -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.inputs.iter().map(|m| tape.constant(m.clone())).collect();
        let (pool, _) = self.build_nodes(&mut tape, &vars)?;
        let mut closest = f64::INFINITY;
        for node in &self.nodes {
            if let Node::Unary(Unary::Relu | Unary::Abs, a) = *node {
                for &x in tape.value(pool[a]).as_slice() {
                    closest = closest.min(x.abs());
                }
            }
        }
        Ok(closest)
    }

    /// [`check_gradients`] on this graph.
    pub fn check(&self, h: f64) -> Result<f64> {
        check_gradients(&self.inputs, h, |tape, vars| self.build(tape, vars))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::rng_from_seed;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(1e-9, 0.0) - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn quadratic_is_exact() {
        let x = Matrix::from_vec(1, 2, vec![3.0, -1.0]).unwrap();
        let err = check_gradients(&[x], FD_STEP, |t, v| {
            let s = t.square(v[0])?;
            Ok(t.sum(s))
        })
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn detached_copy_is_caught() {
        // x · stopgrad(x): the tape sees slope x, the function is x².
        let x = Matrix::scalar(3.0);
        let err = check_gradients(&[x], FD_STEP, |t, v| {
            let c = t.constant(t.value(v[0]).clone());
            t.mul(v[0], c)
        })
        .unwrap();
        assert!((err - 0.5).abs() < 1e-6, "{err}");
    }

    #[test]
    fn random_graphs_are_reproducible_and_kink_free() {
        let a = RandomGraph::generate(&mut rng_from_seed(5)).unwrap();
        let b = RandomGraph::generate(&mut rng_from_seed(5)).unwrap();
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.len(), b.len());
        assert!(a.min_kink_distance().unwrap() > KINK_MARGIN);
    }
}
