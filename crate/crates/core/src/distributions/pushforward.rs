use serde::{Deserialize, Serialize};

use super::{Density, EmpiricalSet, GaussianMixture, Rng, Sampler};
use crate::error::{Error, Result};
use crate::ndcore::{sigmoid, Matrix};

/// Strictly monotone differentiable maps `g: ℝ → ℝ` with closed-form inverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneMap {
    Identity,
    /// `g(z) = scale · z + shift`, `scale ≠ 0`.
    Affine { scale: f64, shift: f64 },
    /// `g(z) = z³ + z`.
    CubicPlusLinear,
    /// `g(z) = 1 / (1 + e^{−z})`, image `(0, 1)`.
    Logistic,
}

impl MonotoneMap {
    /// Maps exercised by the normalisation checks.
    pub fn registered() -> Vec<MonotoneMap> {
        vec![
            MonotoneMap::Identity,
            MonotoneMap::Affine {
                scale: 2.0,
                shift: 3.0,
            },
            MonotoneMap::Affine {
                scale: -0.5,
                shift: 1.0,
            },
            MonotoneMap::CubicPlusLinear,
            MonotoneMap::Logistic,
        ]
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            MonotoneMap::Identity => z,
            MonotoneMap::Affine { scale, shift } => scale * z + shift,
            MonotoneMap::CubicPlusLinear => z * z * z + z,
            MonotoneMap::Logistic => sigmoid(z),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            MonotoneMap::Identity => 1.0,
            MonotoneMap::Affine { scale, .. } => scale,
            MonotoneMap::CubicPlusLinear => 3.0 * z * z + 1.0,
            MonotoneMap::Logistic => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    /// `g⁻¹(x)`, or `None` when `x` is outside the image.
    pub fn inverse(&self, x: f64) -> Option<f64> {
        match *self {
            MonotoneMap::Identity => Some(x),
            MonotoneMap::Affine { scale, shift } => Some((x - shift) / scale),
            MonotoneMap::CubicPlusLinear => {
                // Cardano for z³ + z − x = 0, then Newton to clean up the
                // cancellation between the two cube roots.
                let d = (x * x / 4.0 + 1.0 / 27.0).sqrt();
                let mut z = (x / 2.0 + d).cbrt() + (x / 2.0 - d).cbrt();
                for _ in 0..3 {
                    z -= (z * z * z + z - x) / (3.0 * z * z + 1.0);
                }
                Some(z)
            }
            MonotoneMap::Logistic => {
                (x > 0.0 && x < 1.0).then(|| (x / (1.0 - x)).ln())
            }
        }
    }
}

/// Density of `g(z)` for `z ∼ p_z`, by the change-of-variables formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pushforward1D {
    prior: GaussianMixture,
    map: MonotoneMap,
}

impl Pushforward1D {
    pub fn new(prior: GaussianMixture, map: MonotoneMap) -> Result<Self> {
        if prior.dim() != 1 {
            return Err(Error::contract("Pushforward1D::new", "prior must be 1-D"));
        }
        if let MonotoneMap::Affine { scale, .. } = map {
            if scale == 0.0 || !scale.is_finite() {
                return Err(Error::contract("Pushforward1D::new", "affine scale must be nonzero"));
            }
        }
        Ok(Pushforward1D { prior, map })
    }

    pub fn prior(&self) -> &GaussianMixture {
        &self.prior
    }

    pub fn map(&self) -> MonotoneMap {
        self.map
    }

    /// `p_x(x) = p_z(g⁻¹(x)) · |d g⁻¹/dx|`.
    pub fn pushforward_density(&self, x: f64) -> Result<f64> {
        let z = self.map.inverse(x).ok_or(Error::OutOfSupport { x })?;
        Ok(self.prior.density(&[z])? / self.map.derivative(z).abs())
    }
}

impl Density for Pushforward1D {
    fn dim(&self) -> usize {
        1
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let [x] = x else {
            return Err(Error::contract("log_density", "pushforward densities are 1-D"));
        };
        Ok(match self.map.inverse(*x) {
            Some(z) => self.prior.log_density(&[z])? - self.map.derivative(z).abs().ln(),
            None => f64::NEG_INFINITY,
        })
    }

    fn support_hint(&self) -> Vec<(f64, f64)> {
        let (lo, hi) = self.prior.support_hint()[0];
        let (a, b) = (self.map.apply(lo), self.map.apply(hi));
        vec![(a.min(b), a.max(b))]
    }
}

impl Sampler for Pushforward1D {
    fn sample(&self, rng: &mut Rng, n: usize) -> Result<EmpiricalSet> {
        let z = self.prior.sample(rng, n)?;
        let x: Vec<f64> = z.samples().as_slice().iter().map(|&v| self.map.apply(v)).collect();
        EmpiricalSet::new(Matrix::column(x), None, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::rng_from_seed;

    fn std_normal() -> GaussianMixture {
        GaussianMixture::gaussian_1d(0.0, 1.0).unwrap()
    }

    #[test]
    fn affine_pushforward_at_mean() {
        let pf = Pushforward1D::new(
            std_normal(),
            MonotoneMap::Affine {
                scale: 2.0,
                shift: 3.0,
            },
        )
        .unwrap();
        let expected = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((pf.pushforward_density(3.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.199471).abs() < 1e-6);
    }

    #[test]
    fn identity_pushforward_is_the_prior() {
        let pf = Pushforward1D::new(std_normal(), MonotoneMap::Identity).unwrap();
        for x in [-3.0, -0.5, 0.0, 1.7, 4.2] {
            assert_eq!(pf.pushforward_density(x).unwrap(), std_normal().density(&[x]).unwrap());
        }
    }

    #[test]
    fn cubic_inverse_round_trips() {
        let g = MonotoneMap::CubicPlusLinear;
        for z in [-40.0, -2.5, -1e-3, 0.0, 0.3, 7.0, 123.0] {
            let back = g.inverse(g.apply(z)).unwrap();
            assert!((back - z).abs() <= 1e-12 * (1.0 + z.abs()), "{z} -> {back}");
        }
    }

    #[test]
    fn outside_the_image_is_an_error() {
        let pf = Pushforward1D::new(std_normal(), MonotoneMap::Logistic).unwrap();
        assert!(matches!(
            pf.pushforward_density(1.5),
            Err(Error::OutOfSupport { .. })
        ));
        assert_eq!(pf.log_density(&[-0.1]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn cubic_pushforward_matches_histogram() {
        let pf = Pushforward1D::new(std_normal(), MonotoneMap::CubicPlusLinear).unwrap();
        let n = 1_000_000;
        let samples = pf.sample(&mut rng_from_seed(5), n).unwrap();
        let (lo, hi, bins) = (-1.0, 1.0, 10);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in samples.samples().as_slice() {
            if (lo..hi).contains(&x) {
                counts[((x - lo) / width) as usize] += 1;
            }
        }
        for (b, &c) in counts.iter().enumerate() {
            let empirical = c as f64 / (n as f64 * width);
            // Average the analytic density over the bin by Simpson's rule.
            let (a, m, e) = (lo + b as f64 * width, lo + (b as f64 + 0.5) * width, lo + (b + 1) as f64 * width);
            let analytic = (pf.pushforward_density(a).unwrap()
                + 4.0 * pf.pushforward_density(m).unwrap()
                + pf.pushforward_density(e).unwrap())
                / 6.0;
            let rel = (empirical - analytic).abs() / analytic;
            assert!(rel < 0.03, "bin {b}: empirical {empirical}, analytic {analytic}");
        }
    }
}
