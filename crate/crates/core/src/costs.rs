//! Discriminator and generator costs, all evaluated from logits.
//!
//! With `D = σ(a)` we have `log D = −softplus(−a)` and
//! `log(1 − D) = −softplus(a)`, so every cross-entropy term stays finite and
//! saturates exactly as the underlying function does, with no clamping.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Tape, Var};

/// Largest logit the maximum-likelihood generator cost accepts.
pub const MLE_LOGIT_GUARD: f64 = 50.0;

/// Clamp range for probability-space helpers.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameVariant {
    /// Zero-sum: the generator minimises `½ E log(1 − D(G(z)))`.
    Minimax,
    /// The generator minimises `−½ E log D(G(z))`.
    NonSaturating,
    /// The generator minimises `−½ E exp(σ⁻¹(D(G(z))))`.
    Mle,
}

impl GameVariant {
    pub const ALL: [GameVariant; 3] = [GameVariant::Minimax, GameVariant::NonSaturating, GameVariant::Mle];

    pub fn name(self) -> &'static str {
        match self {
            GameVariant::Minimax => "minimax",
            GameVariant::NonSaturating => "non_saturating",
            GameVariant::Mle => "mle",
        }
    }
}

/// Label smoothing: real targets become `1 − alpha`, fake targets `beta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

impl SmoothingParams {
    pub const NONE: SmoothingParams = SmoothingParams {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let s = SmoothingParams { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    /// Smooths only the real label.
    pub fn one_sided(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (0.0..1.0).contains(&v);
        if !in_range(self.alpha) || !in_range(self.beta) || self.alpha + self.beta >= 1.0 {
            return Err(Error::contract(
                "SmoothingParams",
                format!("need alpha, beta in [0, 1) with alpha + beta < 1, got {self:?}"),
            ));
        }
        Ok(())
    }
}

fn nonempty(tape: &Tape, v: Var, op: &'static str) -> Result<()> {
    if tape.value(v).is_empty() {
        return Err(Error::contract(op, "empty logit set"));
    }
    Ok(())
}

/// Mean of `target · softplus(−a) + (1 − target) · softplus(a)`: binary
/// cross-entropy against a soft target.
fn soft_cross_entropy(tape: &mut Tape, logits: Var, target: f64) -> Result<Var> {
    let neg = tape.neg(logits);
    let sp_neg = tape.softplus(neg);
    let sp_pos = tape.softplus(logits);
    let mean_neg = tape.mean(sp_neg)?;
    let mean_pos = tape.mean(sp_pos)?;
    let a = tape.scale(mean_neg, target);
    let b = tape.scale(mean_pos, 1.0 - target);
    tape.add(a, b)
}

/// The data half of the discriminator cost, `½ E_data CE(1 − α)`.
pub fn d_cost_data_term(tape: &mut Tape, a_data: Var, s: SmoothingParams) -> Result<Var> {
    nonempty(tape, a_data, "d_cost")?;
    let ce = soft_cross_entropy(tape, a_data, 1.0 - s.alpha)?;
    Ok(tape.scale(ce, 0.5))
}

/// The sample half of the discriminator cost, `½ E_z CE(β)`.
pub fn d_cost_fake_term(tape: &mut Tape, a_samples: Var, s: SmoothingParams) -> Result<Var> {
    nonempty(tape, a_samples, "d_cost")?;
    let ce = soft_cross_entropy(tape, a_samples, s.beta)?;
    Ok(tape.scale(ce, 0.5))
}

/// Discriminator cross-entropy with optional label smoothing.
///
/// `−½ E_data[(1−α) log D + α log(1−D)] − ½ E_z[β log D + (1−β) log(1−D)]`;
/// with `α = β = 0` this is the standard discriminator cost.
pub fn d_cost(tape: &mut Tape, a_data: Var, a_samples: Var, s: SmoothingParams) -> Result<Var> {
    s.validate()?;
    let data = d_cost_data_term(tape, a_data, s)?;
    let fake = d_cost_fake_term(tape, a_samples, s)?;
    tape.add(data, fake)
}

/// Generator cost for `variant`, given discriminator logits on generated samples.
pub fn g_cost(tape: &mut Tape, variant: GameVariant, a_samples: Var) -> Result<Var> {
    nonempty(tape, a_samples, "g_cost")?;
    match variant {
        GameVariant::Minimax => {
            let sp = tape.softplus(a_samples);
            let m = tape.mean(sp)?;
            Ok(tape.scale(m, -0.5))
        }
        GameVariant::NonSaturating => {
            let neg = tape.neg(a_samples);
            let sp = tape.softplus(neg);
            let m = tape.mean(sp)?;
            Ok(tape.scale(m, 0.5))
        }
        GameVariant::Mle => {
            if let Some(&logit) = tape
                .value(a_samples)
                .as_slice()
                .iter()
                .find(|&&a| !(a <= MLE_LOGIT_GUARD))
            {
                return Err(Error::LogitOverflow { logit });
            }
            let e = tape.exp(a_samples);
            let m = tape.mean(e)?;
            Ok(tape.scale(m, -0.5))
        }
    }
}

/// Optimal discriminator under label smoothing:
/// `((1 − α) p_data + β p_model) / (p_data + p_model)`.
pub fn smoothed_optimal_d(p_data: f64, p_model: f64, s: SmoothingParams) -> Result<f64> {
    s.validate()?;
    let total = p_data + p_model;
    if !(total > 0.0) {
        return Err(Error::UndefinedPoint);
    }
    Ok(((1.0 - s.alpha) * p_data + s.beta * p_model) / total)
}

/// Pointwise discriminator cost at output `d` for densities `p_data`,
/// `p_model` at one point, with smoothed targets.
pub fn pointwise_d_cost(p_data: f64, p_model: f64, s: SmoothingParams, d: f64) -> f64 {
    let (ld, l1d) = (d.ln(), (1.0 - d).ln());
    -0.5 * (p_data * ((1.0 - s.alpha) * ld + s.alpha * l1d) + p_model * (s.beta * ld + (1.0 - s.beta) * l1d))
}

/// Minimiser of [`pointwise_d_cost`] by ternary search over `(0, 1)`: a
/// numeric cross-check on [`smoothed_optimal_d`] that does not use the
/// closed form.
pub fn smoothed_optimal_d_search(p_data: f64, p_model: f64, s: SmoothingParams) -> Result<f64> {
    s.validate()?;
    if !(p_data + p_model > 0.0) {
        return Err(Error::UndefinedPoint);
    }
    let (mut lo, mut hi) = (PROB_CLAMP, 1.0 - PROB_CLAMP);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if pointwise_d_cost(p_data, p_model, s, m1) < pointwise_d_cost(p_data, p_model, s, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `log(D / (1 − D))` with `D` clamped to `[1e-12, 1 − 1e-12]`.
pub fn logit(d: f64) -> f64 {
    let d = d.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (d / (1.0 - d)).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub d: f64,
    pub cost: f64,
    pub dcost_dlogit: f64,
}

/// Per-sample generator cost and its derivative with respect to the logit,
/// tabulated over discriminator outputs `d_grid ⊂ (0, 1)`.
pub fn cost_response_curve(variant: GameVariant, d_grid: &[f64]) -> Result<Vec<CurvePoint>> {
    d_grid
        .iter()
        .map(|&d| {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::contract(
                    "cost_response_curve",
                    format!("D = {d} is not strictly inside (0, 1)"),
                ));
            }
            let mut tape = Tape::new();
            let a = tape.param(Matrix::scalar(logit(d)));
            let cost = g_cost(&mut tape, variant, a)?;
            let grads = tape.backward(cost)?;
            Ok(CurvePoint {
                d,
                cost: tape.scalar_value(cost)?,
                dcost_dlogit: grads.wrt(a).expect("param").item()?,
            })
        })
        .collect()
}

/// Writes a response curve as `d,cost,dcost_dlogit`.
pub fn write_curve_csv<W: Write>(points: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["d", "cost", "dcost_dlogit"])?;
    for p in points {
        w.write_record([
            crate::distributions::fmt_f64(p.d),
            crate::distributions::fmt_f64(p.cost),
            crate::distributions::fmt_f64(p.dcost_dlogit),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn eval_d(data: &[f64], fake: &[f64], s: SmoothingParams) -> f64 {
        let mut t = Tape::new();
        let a = t.constant(Matrix::column(data.to_vec()));
        let b = t.constant(Matrix::column(fake.to_vec()));
        let c = d_cost(&mut t, a, b, s).unwrap();
        t.scalar_value(c).unwrap()
    }

    fn eval_g(variant: GameVariant, logits: &[f64]) -> (f64, Vec<f64>) {
        let mut t = Tape::new();
        let a = t.param(Matrix::column(logits.to_vec()));
        let c = g_cost(&mut t, variant, a).unwrap();
        let g = t.backward(c).unwrap();
        (t.scalar_value(c).unwrap(), g.wrt(a).unwrap().as_slice().to_vec())
    }

    #[test]
    fn undecided_discriminator_costs_ln2() {
        assert!((eval_d(&[0.0; 3], &[0.0; 4], SmoothingParams::NONE) - LN_2).abs() < 1e-15);
        let smooth = SmoothingParams::one_sided(0.1).unwrap();
        assert!((eval_d(&[0.0; 3], &[0.0; 4], smooth) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_discriminator_costs_nothing() {
        let c = eval_d(&[700.0, 800.0], &[-700.0], SmoothingParams::NONE);
        assert!(c >= 0.0 && c < 1e-300, "{c}");
    }

    #[test]
    fn generator_costs_at_half() {
        let (mm, _) = eval_g(GameVariant::Minimax, &[0.0]);
        let (ns, _) = eval_g(GameVariant::NonSaturating, &[0.0]);
        let (ml, _) = eval_g(GameVariant::Mle, &[0.0]);
        assert!((mm + 0.5 * LN_2).abs() < 1e-15 && (mm + 0.346574).abs() < 1e-6);
        assert!((ns - 0.5 * LN_2).abs() < 1e-15);
        assert_eq!(ml, -0.5);
    }

    #[test]
    fn saturation_behaviour() {
        let (_, mm) = eval_g(GameVariant::Minimax, &[-60.0]);
        let (_, ns) = eval_g(GameVariant::NonSaturating, &[-60.0]);
        assert!(mm[0].abs() < 1e-25);
        assert!((ns[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn mle_cost_is_minus_half_mean_of_f() {
        let logits = [0.3, -1.2, 2.5];
        let (ml, _) = eval_g(GameVariant::Mle, &logits);
        let f: Vec<f64> = logits.iter().map(|a| -a.exp()).collect();
        let expected = -0.5 * f.iter().map(|v| -v).sum::<f64>() / 3.0;
        assert!((ml - expected).abs() < 1e-15);
    }

    #[test]
    fn mle_guard_trips_above_fifty() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::column(vec![1.0, 50.5]));
        assert!(matches!(g_cost(&mut t, GameVariant::Mle, a), Err(Error::LogitOverflow { .. })));
    }

    #[test]
    fn minimax_is_zero_sum_with_fake_term() {
        let logits = vec![-3.0, 0.1, 2.7, 9.0];
        let mut t = Tape::new();
        let a = t.constant(Matrix::column(logits));
        let g = g_cost(&mut t, GameVariant::Minimax, a).unwrap();
        let f = d_cost_fake_term(&mut t, a, SmoothingParams::NONE).unwrap();
        assert_eq!(t.scalar_value(g).unwrap() + t.scalar_value(f).unwrap(), 0.0);
    }

    #[test]
    fn all_variants_push_logits_up() {
        for a in [-30.0, -2.0, 0.0, 1.5, 20.0] {
            for v in GameVariant::ALL {
                let (_, g) = eval_g(v, &[a]);
                assert!(g[0] < 0.0, "{v:?} at {a}: {}", g[0]);
            }
        }
    }

    #[test]
    fn smoothed_optimum_examples() {
        let none = SmoothingParams::NONE;
        assert_eq!(smoothed_optimal_d(0.3, 0.3, none).unwrap(), 0.5);
        let a = SmoothingParams::one_sided(0.1).unwrap();
        assert!((smoothed_optimal_d(0.3, 0.3, a).unwrap() - 0.45).abs() < 1e-15);
        let b = SmoothingParams::new(0.0, 0.1).unwrap();
        assert!((smoothed_optimal_d(0.01, 1.0, b).unwrap() - 0.11 / 1.01).abs() < 1e-15);
        assert!((smoothed_optimal_d(0.01, 1.0, b).unwrap() - 0.10891).abs() < 1e-5);
        assert!((smoothed_optimal_d(0.01, 1.0, none).unwrap() - 0.00990).abs() < 1e-5);
        assert!(matches!(smoothed_optimal_d(0.0, 0.0, none), Err(Error::UndefinedPoint)));
    }

    #[test]
    fn search_agrees_with_closed_form() {
        for (pd, pm, a, b) in [(1.0, 1.0, 0.0, 0.0), (0.3, 2.0, 0.1, 0.0), (2.0, 0.01, 0.2, 0.3)] {
            let s = SmoothingParams::new(a, b).unwrap();
            let exact = smoothed_optimal_d(pd, pm, s).unwrap();
            let found = smoothed_optimal_d_search(pd, pm, s).unwrap();
            assert!((exact - found).abs() < 1e-7, "{exact} vs {found}");
        }
    }

    #[test]
    fn smoothing_range_is_checked() {
        assert!(SmoothingParams::new(0.6, 0.4).is_err());
        assert!(SmoothingParams::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn response_curve_limits() {
        let grid = [1e-6, 0.5, 0.99];
        let mm = cost_response_curve(GameVariant::Minimax, &grid).unwrap();
        let ns = cost_response_curve(GameVariant::NonSaturating, &grid).unwrap();
        let ml = cost_response_curve(GameVariant::Mle, &grid).unwrap();
        assert!(mm[0].dcost_dlogit.abs() < 1e-6);
        assert!((ns[0].dcost_dlogit + 0.5).abs() < 1e-6);
        let ratio = ml[2].dcost_dlogit / ml[1].dcost_dlogit;
        assert!((ratio - 99.0).abs() < 1e-6, "{ratio}");
        assert!(cost_response_curve(GameVariant::Mle, &[1.0]).is_err());
    }

    #[test]
    fn curve_csv_header() {
        let pts = cost_response_curve(GameVariant::Minimax, &[0.5]).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&pts, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("d,cost,dcost_dlogit\n"));
    }
}
