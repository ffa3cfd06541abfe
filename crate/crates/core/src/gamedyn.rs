//! Gradient dynamics of two-player zero-sum games in two scalars.
//!
//! Player `x` minimises `V(x, y)` and player `y` minimises `−V(x, y)`. For
//! the bilinear game `V = xy` the continuous-time dynamics `ẋ = −y`, `ẏ = x`
//! orbit the equilibrium at constant radius, and discrete simultaneous
//! gradient descent spirals outward by a factor `√(1 + η²)` per step.
//!
//! Continuous trajectories use fourth-order Runge–Kutta: with explicit Euler
//! the radius would grow from integration error alone and blur the
//! distinction between the game and the integrator.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::fmt_f64;
use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Tape, Var};

/// A zero-sum game whose value is built from tape operations, so gradients
/// come from the ordinary backward pass.
pub trait ZeroSumGame {
    fn value(&self, tape: &mut Tape, x: Var, y: Var) -> Result<Var>;

    /// Costs `(V, −V)` for players `x` and `y`.
    fn costs(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let (xv, yv) = (tape.constant(Matrix::scalar(x)), tape.constant(Matrix::scalar(y)));
        let v = self.value(&mut tape, xv, yv)?;
        let v = tape.scalar_value(v)?;
        Ok((v, -v))
    }

    /// Each player's gradient of its own cost: `(∂V/∂x, −∂V/∂y)`.
    fn own_gradients(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let mut tape = Tape::new();
        let (xv, yv) = (tape.param(Matrix::scalar(x)), tape.param(Matrix::scalar(y)));
        let v = self.value(&mut tape, xv, yv)?;
        let g = tape.backward(v)?;
        Ok((g.wrt(xv).expect("param").item()?, -g.wrt(yv).expect("param").item()?))
    }

    /// Each player's second derivative of its own cost, by central
    /// differences of the tape gradients.
    fn own_curvatures(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let h = 1e-4;
        let (gx_hi, _) = self.own_gradients(x + h, y)?;
        let (gx_lo, _) = self.own_gradients(x - h, y)?;
        let (_, gy_hi) = self.own_gradients(x, y + h)?;
        let (_, gy_lo) = self.own_gradients(x, y - h)?;
        Ok(((gx_hi - gx_lo) / (2.0 * h), (gy_hi - gy_lo) / (2.0 * h)))
    }
}

/// `V(x, y) = x · y`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Bilinear;

impl ZeroSumGame for Bilinear {
    fn value(&self, tape: &mut Tape, x: Var, y: Var) -> Result<Var> {
        tape.mul(x, y)
    }
}

/// `V(x, y) = x² − y²`: a strict saddle, convex for `x` and concave for `y`.
#[derive(Clone, Copy, Debug, Default)]
pub struct QuadraticSaddle;

impl ZeroSumGame for QuadraticSaddle {
    fn value(&self, tape: &mut Tape, x: Var, y: Var) -> Result<Var> {
        let x2 = tape.square(x)?;
        let y2 = tape.square(y)?;
        tape.sub(x2, y2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearState {
    /// Time for continuous trajectories, step index for discrete ones.
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl BilinearState {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<BilinearState>,
    /// Step at which a coordinate stopped being finite.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn last(&self) -> BilinearState {
        *self.points.last().expect("trajectories start with the initial point")
    }

    /// Writes `t_or_step,x,y,radius`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_or_step", "x", "y", "radius"])?;
        for p in &self.points {
            w.write_record([fmt_f64(p.t), fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.radius())])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact solution of `ẋ = −y`, `ẏ = x`: rotation by angle `t`.
pub fn closed_form_orbit(x0: f64, y0: f64, t: f64) -> (f64, f64) {
    let (s, c) = t.sin_cos();
    (x0 * c - y0 * s, x0 * s + y0 * c)
}

fn rk4(
    x0: f64,
    y0: f64,
    t_end: f64,
    dt: f64,
    mut field: impl FnMut(f64, f64) -> Result<(f64, f64)>,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::contract("integrate_continuous", "need dt > 0 and T >= 0"));
    }
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut points = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (x0, y0);
    points.push(BilinearState { t: 0.0, x, y });
    for k in 1..=steps {
        let (ax, ay) = field(x, y)?;
        let (bx, by) = field(x + 0.5 * h * ax, y + 0.5 * h * ay)?;
        let (cx, cy) = field(x + 0.5 * h * bx, y + 0.5 * h * by)?;
        let (dx, dy) = field(x + h * cx, y + h * cy)?;
        x += h / 6.0 * (ax + 2.0 * bx + 2.0 * cx + dx);
        y += h / 6.0 * (ay + 2.0 * by + 2.0 * cy + dy);
        points.push(BilinearState { t: k as f64 * h, x, y });
    }
    Ok(Trajectory {
        points,
        diverged_at: None,
    })
}

/// RK4 trajectory of the bilinear game's gradient flow on `[0, T]`. The step
/// is shrunk slightly if needed so the last point lands exactly on `T`.
pub fn integrate_continuous(x0: f64, y0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    rk4(x0, y0, t_end, dt, |x, y| Ok((-y, x)))
}

/// RK4 gradient flow `ẋ = −∂J_x/∂x`, `ẏ = −∂J_y/∂y` of any game.
pub fn integrate_game(game: &dyn ZeroSumGame, x0: f64, y0: f64, t_end: f64, dt: f64) -> Result<Trajectory> {
    rk4(x0, y0, t_end, dt, |x, y| {
        let (gx, gy) = game.own_gradients(x, y)?;
        Ok((-gx, -gy))
    })
}

/// Simultaneous gradient descent on the bilinear game:
/// `x ← x − ηy`, `y ← y + ηx`, both from the old values.
pub fn simultaneous_gd_discrete(x0: f64, y0: f64, eta: f64, steps: usize) -> Result<Trajectory> {
    if !(eta > 0.0) {
        return Err(Error::contract("simultaneous_gd_discrete", "learning rate must be > 0"));
    }
    let mut points = Vec::with_capacity(steps + 1);
    let (mut x, mut y) = (x0, y0);
    points.push(BilinearState { t: 0.0, x, y });
    for k in 1..=steps {
        let (nx, ny) = (x - eta * y, y + eta * x);
        if !(nx.is_finite() && ny.is_finite()) {
            return Ok(Trajectory {
                points,
                diverged_at: Some(k),
            });
        }
        (x, y) = (nx, ny);
        points.push(BilinearState { t: k as f64, x, y });
    }
    Ok(Trajectory {
        points,
        diverged_at: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    NotStationary,
    /// Stationary with both own-curvatures positive.
    StrictLocalNash,
    /// Stationary with both own-curvatures zero: each player's cost is flat
    /// in its own parameter, as in the bilinear game.
    PathologicalFlat,
    /// Stationary, and some player's cost curves downward.
    NotLocalNash,
    /// Stationary, curvatures non-negative, at least one zero.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    pub gradients: (f64, f64),
    pub curvatures: (f64, f64),
    pub kind: EquilibriumKind,
}

impl EquilibriumVerdict {
    pub fn is_equilibrium(&self) -> bool {
        !matches!(self.kind, EquilibriumKind::NotStationary | EquilibriumKind::NotLocalNash)
    }
}

pub const STATIONARY_TOL: f64 = 1e-12;
const CURVATURE_TOL: f64 = 1e-6;

pub fn equilibrium_check(game: &dyn ZeroSumGame, x: f64, y: f64) -> Result<EquilibriumVerdict> {
    let gradients = game.own_gradients(x, y)?;
    let curvatures = game.own_curvatures(x, y)?;
    let stationary = gradients.0.abs() <= STATIONARY_TOL && gradients.1.abs() <= STATIONARY_TOL;
    let sign = |c: f64| {
        if c > CURVATURE_TOL {
            1
        } else if c < -CURVATURE_TOL {
            -1
        } else {
            0
        }
    };
    let kind = match (stationary, sign(curvatures.0), sign(curvatures.1)) {
        (false, _, _) => EquilibriumKind::NotStationary,
        (true, 1, 1) => EquilibriumKind::StrictLocalNash,
        (true, 0, 0) => EquilibriumKind::PathologicalFlat,
        (true, a, b) if a < 0 || b < 0 => EquilibriumKind::NotLocalNash,
        _ => EquilibriumKind::Degenerate,
    };
    Ok(EquilibriumVerdict {
        gradients,
        curvatures,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn orbit_examples() {
        assert_eq!(closed_form_orbit(1.0, 0.0, 0.0), (1.0, 0.0));
        let (x, y) = closed_form_orbit(1.0, 0.0, FRAC_PI_2);
        assert!(x.abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
        for t in [0.3, 2.0, 17.5] {
            let (x, y) = closed_form_orbit(0.6, -1.1, t);
            assert!((x.hypot(y) - 0.6f64.hypot(1.1)).abs() < 1e-14);
        }
    }

    #[test]
    fn rk4_full_period() {
        let tr = integrate_continuous(1.0, 0.0, 2.0 * PI, 1e-3).unwrap();
        let end = tr.last();
        assert!((end.t - 2.0 * PI).abs() < 1e-12);
        assert!((end.x - 1.0).abs() < 1e-4 && end.y.abs() < 1e-4);
        assert!((end.radius() - 1.0).abs() < 1e-6);
        let rest = integrate_continuous(0.0, 0.0, 2.0 * PI, 1e-3).unwrap();
        assert!(rest.points.iter().all(|p| p.x == 0.0 && p.y == 0.0));
    }

    #[test]
    fn generic_flow_matches_bilinear_flow() {
        let a = integrate_continuous(0.5, 0.2, 1.0, 0.01).unwrap();
        let b = integrate_game(&Bilinear, 0.5, 0.2, 1.0, 0.01).unwrap();
        for (p, q) in a.points.iter().zip(&b.points) {
            assert!((p.x - q.x).abs() < 1e-14 && (p.y - q.y).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_examples() {
        let tr = simultaneous_gd_discrete(1.0, 0.0, 0.1, 1).unwrap();
        assert_eq!((tr.last().x, tr.last().y), (1.0, 0.1));
        assert!((tr.last().radius().powi(2) - 1.01).abs() < 1e-15);
        let rest = simultaneous_gd_discrete(0.0, 0.0, 0.7, 20).unwrap();
        assert!(rest.points.iter().all(|p| p.x == 0.0 && p.y == 0.0));
        assert!(simultaneous_gd_discrete(1.0, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn discrete_overflow_is_marked() {
        let tr = simultaneous_gd_discrete(1.0, 1.0, 1e100, 10).unwrap();
        assert!(tr.diverged_at.is_some());
    }

    #[test]
    fn equilibrium_verdicts() {
        let v = equilibrium_check(&Bilinear, 0.0, 0.0).unwrap();
        assert_eq!(v.kind, EquilibriumKind::PathologicalFlat);
        assert_eq!(v.curvatures, (0.0, 0.0));
        let v = equilibrium_check(&Bilinear, 1.0, 1.0).unwrap();
        assert_eq!(v.kind, EquilibriumKind::NotStationary);
        assert!(!v.is_equilibrium());
        let v = equilibrium_check(&QuadraticSaddle, 0.0, 0.0).unwrap();
        assert_eq!(v.kind, EquilibriumKind::StrictLocalNash);
        assert!((v.curvatures.0 - 2.0).abs() < 1e-8 && (v.curvatures.1 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn trajectory_csv_header() {
        let mut buf = Vec::new();
        simultaneous_gd_discrete(1.0, 0.0, 0.1, 2).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_or_step,x,y,radius\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
