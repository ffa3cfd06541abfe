use super::Density;
use crate::error::{Error, Result};

/// A set of quadrature nodes and weights.
pub trait Quadrature {
    fn dim(&self) -> usize;
    fn for_each(&self, f: &mut dyn FnMut(&[f64], f64) -> Result<()>) -> Result<()>;
}

/// Uniform trapezoid rule on `[lo, hi]` with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

pub const DEFAULT_GRID_POINTS: usize = 4096;

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi > lo) || n < 2 {
            return Err(Error::contract(
                "Grid1D::new",
                format!("need lo < hi and n >= 2, got [{lo}, {hi}] with {n}"),
            ));
        }
        Ok(Grid1D { lo, hi, n })
    }

    /// Default grid over the union of every density's support hint.
    pub fn covering(densities: &[&dyn Density]) -> Result<Self> {
        Self::covering_with(densities, DEFAULT_GRID_POINTS)
    }

    pub fn covering_with(densities: &[&dyn Density], n: usize) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for d in densities {
            if d.dim() != 1 {
                return Err(Error::contract("Grid1D::covering", "densities must be 1-D"));
            }
            let (a, b) = d.support_hint()[0];
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Self::new(lo, hi, n)
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }

    /// Trapezoid integral of `f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.n).map(|i| self.weight(i) * f(self.point(i))).sum()
    }
}

impl Quadrature for Grid1D {
    fn dim(&self) -> usize {
        1
    }

    fn for_each(&self, f: &mut dyn FnMut(&[f64], f64) -> Result<()>) -> Result<()> {
        for i in 0..self.n {
            f(&[self.point(i)], self.weight(i))?;
        }
        Ok(())
    }
}

/// Tensor product of two trapezoid rules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    pub x: Grid1D,
    pub y: Grid1D,
}

impl Grid2D {
    pub fn covering_with(densities: &[&dyn Density], n: usize) -> Result<Self> {
        let mut bounds = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for d in densities {
            if d.dim() != 2 {
                return Err(Error::contract("Grid2D::covering", "densities must be 2-D"));
            }
            for (b, (lo, hi)) in bounds.iter_mut().zip(d.support_hint()) {
                b.0 = b.0.min(lo);
                b.1 = b.1.max(hi);
            }
        }
        Ok(Grid2D {
            x: Grid1D::new(bounds[0].0, bounds[0].1, n)?,
            y: Grid1D::new(bounds[1].0, bounds[1].1, n)?,
        })
    }
}

impl Quadrature for Grid2D {
    fn dim(&self) -> usize {
        2
    }

    fn for_each(&self, f: &mut dyn FnMut(&[f64], f64) -> Result<()>) -> Result<()> {
        for i in 0..self.x.n {
            let (xi, wi) = (self.x.point(i), self.x.weight(i));
            for j in 0..self.y.n {
                f(&[xi, self.y.point(j)], wi * self.y.weight(j))?;
            }
        }
        Ok(())
    }
}

fn check_dims(op: &'static str, p: &dyn Density, q: &dyn Density, grid: &dyn Quadrature) -> Result<()> {
    if p.dim() != q.dim() || p.dim() != grid.dim() {
        return Err(Error::contract(
            op,
            format!("dimensions differ: p {}, q {}, grid {}", p.dim(), q.dim(), grid.dim()),
        ));
    }
    Ok(())
}

/// `log((e^a + e^b) / 2)`, symmetric in its arguments and exact when `a == b`.
fn log_mean_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((lo - hi).exp().ln_1p() - std::f64::consts::LN_2)
}

/// Trapezoid estimate of `KL(p ‖ q) = ∫ p log(p / q)`.
///
/// Integrands are formed in log space, so Gaussian tails never underflow
/// into a spurious zero for `q`.
pub fn kl_quadrature(p: &dyn Density, q: &dyn Density, grid: &dyn Quadrature) -> Result<f64> {
    check_dims("kl_quadrature", p, q, grid)?;
    let mut total = 0.0;
    grid.for_each(&mut |x, w| {
        let lp = p.log_density(x)?;
        if lp == f64::NEG_INFINITY {
            return Ok(());
        }
        let lq = q.log_density(x)?;
        if lq == f64::NEG_INFINITY {
            return Err(Error::DivergenceUndefined { x: x[0] });
        }
        total += w * lp.exp() * (lp - lq);
        Ok(())
    })?;
    Ok(total)
}

/// Trapezoid estimate of `JS(p, q) = ½KL(p ‖ m) + ½KL(q ‖ m)`, `m = (p + q)/2`.
pub fn js_quadrature(p: &dyn Density, q: &dyn Density, grid: &dyn Quadrature) -> Result<f64> {
    check_dims("js_quadrature", p, q, grid)?;
    let mut kl_pm = 0.0;
    let mut kl_qm = 0.0;
    grid.for_each(&mut |x, w| {
        let lp = p.log_density(x)?;
        let lq = q.log_density(x)?;
        let lm = log_mean_exp(lp, lq);
        if lp > f64::NEG_INFINITY {
            kl_pm += w * lp.exp() * (lp - lm);
        }
        if lq > f64::NEG_INFINITY {
            kl_qm += w * lq.exp() * (lq - lm);
        }
        Ok(())
    })?;
    Ok(0.5 * kl_pm + 0.5 * kl_qm)
}
