//! Fitting a single Gaussian to a mixture under either direction of KL.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::distributions::{kl_quadrature, Density, GaussianMixture, Grid1D, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::ndcore::{adam_step, AdamConfig, AdamState, Matrix, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `KL(p_data ‖ p_model)`: mean-covering.
    Forward,
    /// `KL(p_model ‖ p_data)`: mode-seeking.
    Reverse,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlFitConfig {
    pub init_mean: f64,
    pub init_var: f64,
    pub steps: usize,
    pub adam: AdamConfig,
}

impl Default for KlFitConfig {
    fn default() -> Self {
        KlFitConfig {
            init_mean: 0.0,
            init_var: 1.0,
            steps: 3000,
            adam: AdamConfig {
                lr: 0.02,
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub var: f64,
    /// Divergence in the fitted direction at the final parameters.
    pub kl: f64,
}

impl GaussianFit {
    pub fn density(&self) -> Result<GaussianMixture> {
        GaussianMixture::gaussian_1d(self.mean, self.var)
    }
}

/// The quadrature grid used for fitting: the target's support hint widened
/// to twice its half-width on each side.
pub fn fit_grid(mixture: &GaussianMixture) -> Result<Grid1D> {
    let (lo, hi) = mixture.support_hint()[0];
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    Grid1D::new(mid - 2.0 * half, mid + 2.0 * half, DEFAULT_GRID_POINTS)
}

/// Gradient descent (Adam) on quadrature KL over `(μ, ρ)` with variance
/// `exp(2ρ)`.
pub fn fit_gaussian_kl(
    mixture: &GaussianMixture,
    direction: KlDirection,
    config: &KlFitConfig,
) -> Result<GaussianFit> {
    if mixture.dim() != 1 {
        return Err(Error::contract("fit_gaussian_kl", "mixture must be 1-D"));
    }
    if !(config.init_var > 0.0) {
        return Err(Error::contract("fit_gaussian_kl", "initial variance must be positive"));
    }
    let grid = fit_grid(mixture)?;
    let points = grid.points();
    let weights: Vec<f64> = (0..grid.n).map(|i| grid.weight(i)).collect();
    let log_p: Vec<f64> = points
        .iter()
        .map(|&x| mixture.log_density(&[x]))
        .collect::<Result<_>>()?;
    let wp: Vec<f64> = weights.iter().zip(&log_p).map(|(w, lp)| w * lp.exp()).collect();

    let mut theta = vec![config.init_mean, 0.5 * config.init_var.ln()];
    let mut adam = AdamState::new(2, config.adam)?;
    for step in 0..config.steps {
        let mut tape = Tape::new();
        let mu = tape.param(Matrix::scalar(theta[0]));
        let rho = tape.param(Matrix::scalar(theta[1]));
        let x = tape.constant(Matrix::column(points.clone()));
        let lp = tape.constant(Matrix::column(log_p.clone()));
        let centered = tape.sub(x, mu)?;
        let sq = tape.square(centered)?;
        let neg2rho = tape.scale(rho, -2.0);
        let inv_var = tape.exp(neg2rho);
        let quad = tape.mul(sq, inv_var)?;
        let half = tape.scale(quad, -0.5);
        let shifted = tape.sub(half, rho)?;
        let lq = tape.offset(shifted, -0.5 * (2.0 * PI).ln());
        let loss = match direction {
            KlDirection::Forward => {
                let gap = tape.sub(lp, lq)?;
                let w = tape.constant(Matrix::column(wp.clone()));
                let terms = tape.mul(w, gap)?;
                tape.sum(terms)
            }
            KlDirection::Reverse => {
                let q = tape.exp(lq);
                let gap = tape.sub(lq, lp)?;
                let w = tape.constant(Matrix::column(weights.clone()));
                let wq = tape.mul(w, q)?;
                let terms = tape.mul(wq, gap)?;
                tape.sum(terms)
            }
        };
        if !tape.scalar_value(loss)?.is_finite() {
            return Err(Error::Diverged { step, last: None });
        }
        let grads = tape.backward(loss)?;
        let g = [
            grads.wrt(mu).expect("param").item()?,
            grads.wrt(rho).expect("param").item()?,
        ];
        adam_step(&mut theta, &g, &mut adam)?;
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { step, last: None });
        }
    }
    let fitted = GaussianMixture::gaussian_1d(theta[0], (2.0 * theta[1]).exp())?;
    let kl = match direction {
        KlDirection::Forward => kl_quadrature(mixture, &fitted, &grid)?,
        KlDirection::Reverse => kl_quadrature(&fitted, mixture, &grid)?,
    };
    Ok(GaussianFit {
        mean: theta[0],
        var: (2.0 * theta[1]).exp(),
        kl,
    })
}
