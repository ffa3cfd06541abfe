//! Under an optimal discriminator, the maximum-likelihood generator cost has
//! the same expected gradient as `KL(p_data ‖ p_g)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::costs::{self, GameVariant};
use crate::distributions::{
    fill_standard_normal, rng_from_seed, Density, GaussianMixture, Grid1D, DEFAULT_GRID_POINTS,
};
use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Tape, Var};

/// `g(z) = scale · z + shift` with `z ~ N(0, 1)`, so `p_g = N(shift, scale²)`.
///
/// A location family holds `scale` fixed and has `shift` as its only
/// parameter; otherwise the parameters are `(scale, shift)` in that order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFamily {
    pub scale: f64,
    pub shift: f64,
    #[serde(default)]
    pub location_only: bool,
}

impl AffineFamily {
    pub fn new(scale: f64, shift: f64) -> Result<Self> {
        if !(scale != 0.0 && scale.is_finite() && shift.is_finite()) {
            return Err(Error::contract(
                "AffineFamily",
                "scale must be finite and nonzero; the map must be invertible",
            ));
        }
        Ok(AffineFamily {
            scale,
            shift,
            location_only: false,
        })
    }

    /// `g(z) = θ + z`.
    pub fn location(theta: f64) -> Result<Self> {
        let mut f = Self::new(1.0, theta)?;
        f.location_only = true;
        Ok(f)
    }

    pub fn n_params(&self) -> usize {
        if self.location_only {
            1
        } else {
            2
        }
    }

    pub fn density(&self) -> GaussianMixture {
        GaussianMixture::gaussian_1d(self.shift, self.scale * self.scale).expect("validated")
    }

    /// `∂θ log p_g(x)` over the family's parameters.
    pub fn score(&self, x: f64) -> Vec<f64> {
        let u = (x - self.shift) / self.scale;
        if self.location_only {
            vec![u / self.scale]
        } else {
            vec![(u * u - 1.0) / self.scale, u / self.scale]
        }
    }
}

/// Both routes to the generator gradient, over the family's parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleGradientCheck {
    pub gan_grad: Vec<f64>,
    pub kl_grad: Vec<f64>,
    /// `‖gan − kl‖ / ‖kl‖`, or the absolute difference when `‖kl‖ < 1e-8`.
    pub rel_error: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖estimate − truth‖ / ‖truth‖`, falling back to the absolute difference
/// when `‖truth‖ < 1e-8`.
pub fn gradient_rel_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    let scale = norm(truth);
    if scale < 1e-8 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Quadrature check of the importance-weight identity.
///
/// `kl_grad = −∫ p_data ∂θ log p_g dx` over an `x` grid. `gan_grad` is
/// `E_{x∼p_g}[f(x) ∂θ log p_g(x)]` with the frozen weight
/// `f = −p_data / p_g`, written as an expectation over the latent `z` and
/// integrated on a separate `z` grid.
pub fn mle_gradient_check(family: AffineFamily, p_data: &dyn Density) -> Result<MleGradientCheck> {
    if p_data.dim() != 1 {
        return Err(Error::contract("mle_gradient_check", "p_data must be 1-D"));
    }
    let p_g = family.density();
    let x_grid = Grid1D::covering(&[p_data, &p_g])?;
    let k = family.n_params();
    let mut kl_grad = vec![0.0; k];
    for i in 0..x_grid.n {
        let x = x_grid.point(i);
        let w = x_grid.weight(i) * p_data.density(&[x])?;
        for (g, s) in kl_grad.iter_mut().zip(family.score(x)) {
            *g -= w * s;
        }
    }

    // z range: the prior's bulk plus the pre-image of the data's bulk.
    let (lo, hi) = p_data.support_hint()[0];
    let (a, b) = ((lo - family.shift) / family.scale, (hi - family.shift) / family.scale);
    let z_grid = Grid1D::new(a.min(b).min(-10.0), a.max(b).max(10.0), DEFAULT_GRID_POINTS)?;
    let mut gan_grad = vec![0.0; k];
    for i in 0..z_grid.n {
        let z = z_grid.point(i);
        let x = family.scale * z + family.shift;
        let log_pz = -0.5 * (z * z + (2.0 * PI).ln());
        let lp = p_data.log_density(&[x])?;
        if lp == f64::NEG_INFINITY {
            continue;
        }
        let lg = p_g.log_density(&[x])?;
        // p_z(z) · f(x) with f = −exp(log p_data − log p_g).
        let weighted = -(log_pz + lp - lg).exp();
        for (g, s) in gan_grad.iter_mut().zip(family.score(x)) {
            *g += z_grid.weight(i) * weighted * s;
        }
    }
    Ok(MleGradientCheck {
        rel_error: gradient_rel_error(&gan_grad, &kl_grad),
        gan_grad,
        kl_grad,
    })
}

/// `log p(x)` of a 1-D mixture for every row of `x`, on the tape.
fn mixture_log_density(tape: &mut Tape, mixture: &GaussianMixture, x: Var) -> Result<Var> {
    let mut columns: Option<Var> = None;
    for c in mixture.components().iter().filter(|c| c.weight > 0.0) {
        let (m, v) = (c.mean[0], c.var[0]);
        let centered = tape.offset(x, -m);
        let sq = tape.square(centered)?;
        let scaled = tape.scale(sq, -0.5 / v);
        let col = tape.offset(scaled, c.weight.ln() - 0.5 * (2.0 * PI * v).ln());
        columns = Some(match columns {
            Some(prev) => tape.concat_cols(prev, col)?,
            None => col,
        });
    }
    tape.logsumexp_cols(columns.expect("a mixture has a positive-weight component"))
}

/// Monte-Carlo estimate of the same gradient through the generator cost.
///
/// The optimal logit `a*(x) = log p_data(x) − log p_g(x)` is computed
/// analytically with `p_g` frozen at `family`, and the pathwise gradient of
/// `J^(G) = −½ E_z exp(a*(g(z)))` is taken on the tape. Since
/// `J^(G) = ½ E[f]` with `f = −exp(a*)`, the estimate returned is `2 ∇θ J^(G)`.
pub fn mle_gradient_monte_carlo(
    family: AffineFamily,
    p_data: &GaussianMixture,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if p_data.dim() != 1 || n == 0 {
        return Err(Error::contract("mle_gradient_monte_carlo", "need a 1-D target and n > 0"));
    }
    let mut z = vec![0.0; n];
    fill_standard_normal(&mut rng_from_seed(seed), &mut z);
    let frozen = family.density();

    let mut tape = Tape::new();
    let scale = tape.param(Matrix::scalar(family.scale));
    let shift = tape.param(Matrix::scalar(family.shift));
    let zv = tape.constant(Matrix::column(z));
    let scaled = tape.mul(zv, scale)?;
    let x = tape.add(scaled, shift)?;
    let lp = mixture_log_density(&mut tape, p_data, x)?;
    let lg = mixture_log_density(&mut tape, &frozen, x)?;
    let logit = tape.sub(lp, lg)?;
    let cost = costs::g_cost(&mut tape, GameVariant::Mle, logit)?;
    let grads = tape.backward(cost)?;
    let g = |v: Var| grads.wrt(v).expect("param").item().map(|g| 2.0 * g);
    if family.location_only {
        Ok(vec![g(shift)?])
    } else {
        Ok(vec![g(scale)?, g(shift)?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_vanish_at_the_optimum() {
        let fam = AffineFamily::new(1.5, -0.5).unwrap();
        let check = mle_gradient_check(fam, &fam.density()).unwrap();
        for v in check.gan_grad.iter().chain(&check.kl_grad) {
            assert!(v.abs() < 1e-8, "{check:?}");
        }
    }

    #[test]
    fn location_family_matches_closed_form() {
        let fam = AffineFamily::location(0.0).unwrap();
        let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
        let check = mle_gradient_check(fam, &data).unwrap();
        // KL(N(2,1) ‖ N(θ,1)) = (θ − 2)²/2.
        assert_eq!(check.kl_grad.len(), 1);
        assert!((check.kl_grad[0] + 2.0).abs() < 1e-8, "{check:?}");
        assert!((check.gan_grad[0] + 2.0).abs() < 1e-4, "{check:?}");
        assert!(check.rel_error < 1e-3);

        let full = mle_gradient_check(AffineFamily::new(1.0, 0.0).unwrap(), &data).unwrap();
        assert!((full.kl_grad[1] - check.kl_grad[0]).abs() < 1e-12);
        // ∂/∂s at s = 1: 1 − (1 + 2²) = −4.
        assert!((full.kl_grad[0] + 4.0).abs() < 1e-8);
    }

    #[test]
    fn scale_gradient_matches_closed_form() {
        // KL(N(m, v) ‖ N(b, s²)) = log s − ½ log v + (v + (m − b)²)/(2s²) − ½.
        let (m, v) = (0.7, 2.0);
        let (s, b) = (0.8, -0.3);
        let expected_s = 1.0 / s - (v + (m - b) * (m - b)) / (s * s * s);
        let expected_b = -(m - b) / (s * s);
        let check = mle_gradient_check(
            AffineFamily::new(s, b).unwrap(),
            &GaussianMixture::gaussian_1d(m, v).unwrap(),
        )
        .unwrap();
        assert!((check.kl_grad[0] - expected_s).abs() < 1e-8);
        assert!((check.kl_grad[1] - expected_b).abs() < 1e-8);
        assert!(check.rel_error < 1e-3, "{check:?}");
    }

    #[test]
    fn monte_carlo_route_is_unbiased_at_the_optimum() {
        let fam = AffineFamily::new(1.0, 0.5).unwrap();
        // f ≡ −1 when p_g = p_data, so the pathwise gradient is exactly zero.
        let g = mle_gradient_monte_carlo(fam, &fam.density(), 1000, 3).unwrap();
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12, "{g:?}");
    }

    #[test]
    fn monte_carlo_location_gradient_is_close() {
        let fam = AffineFamily::location(0.0).unwrap();
        let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
        let g = mle_gradient_monte_carlo(fam, &data, 100_000, 4).unwrap();
        assert!(gradient_rel_error(&g, &[-2.0]) < 0.05, "{g:?}");
    }

    #[test]
    fn singular_family_is_rejected() {
        assert!(AffineFamily::new(0.0, 1.0).is_err());
    }
}
