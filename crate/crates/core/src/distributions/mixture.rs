use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{fill_standard_normal, Density, EmpiricalSet, Rng, Sampler};
use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// One diagonal-covariance Gaussian component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl Component {
    fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(x)
            .map(|((m, v), xi)| -0.5 * ((2.0 * PI * v).ln() + (xi - m).powi(2) / v))
            .sum()
    }
}

/// Finite mixture of diagonal Gaussians in one or two dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    components: Vec<Component>,
    dim: usize,
}

/// Names accepted by [`target`].
pub const TARGET_NAMES: [&str; 3] = ["two-gauss-1d", "ring8", "grid25"];

/// Standard toy targets.
///
/// * `two-gauss-1d`: `½N(−2, 1) + ½N(2, 1)`.
/// * `ring8`: eight equal components with means on the radius-2 circle and
///   standard deviation 0.02.
/// * `grid25`: 25 equal components on the `{−4, −2, 0, 2, 4}²` lattice with
///   standard deviation 0.05.
pub fn target(name: &str) -> Option<GaussianMixture> {
    let built = match name {
        "two-gauss-1d" => GaussianMixture::new(vec![
            Component {
                weight: 0.5,
                mean: vec![-2.0],
                var: vec![1.0],
            },
            Component {
                weight: 0.5,
                mean: vec![2.0],
                var: vec![1.0],
            },
        ]),
        "ring8" => GaussianMixture::new(
            (0..8)
                .map(|k| {
                    let angle = 2.0 * PI * k as f64 / 8.0;
                    Component {
                        weight: 1.0 / 8.0,
                        mean: vec![2.0 * angle.cos(), 2.0 * angle.sin()],
                        var: vec![0.02 * 0.02; 2],
                    }
                })
                .collect(),
        ),
        "grid25" => GaussianMixture::new(
            (0..25)
                .map(|k| Component {
                    weight: 1.0 / 25.0,
                    mean: vec![-4.0 + 2.0 * (k / 5) as f64, -4.0 + 2.0 * (k % 5) as f64],
                    var: vec![0.05 * 0.05; 2],
                })
                .collect(),
        ),
        _ => return None,
    };
    built.ok()
}

impl GaussianMixture {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::contract("GaussianMixture::new", "no components"));
        };
        let dim = first.mean.len();
        if !(1..=2).contains(&dim) {
            return Err(Error::contract("GaussianMixture::new", format!("dimension {dim} not in 1..=2")));
        }
        for c in &components {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(Error::contract("GaussianMixture::new", "component dimensions differ"));
            }
            if c.var.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::contract("GaussianMixture::new", "variances must be positive"));
            }
            if !(c.weight >= 0.0) {
                return Err(Error::contract("GaussianMixture::new", "weights must be non-negative"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(
                "GaussianMixture::new",
                format!("weights sum to {total}, not 1"),
            ));
        }
        Ok(GaussianMixture { components, dim })
    }

    /// Single Gaussian `N(mean, var)` with diagonal covariance.
    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        Self::new(vec![Component {
            weight: 1.0,
            mean,
            var,
        }])
    }

    pub fn gaussian_1d(mean: f64, var: f64) -> Result<Self> {
        Self::gaussian(vec![mean], vec![var])
    }

    /// Equal-weight mixture of isotropic components.
    pub fn equal_weights(means: &[Vec<f64>], std: f64) -> Result<Self> {
        let w = 1.0 / means.len() as f64;
        Self::new(
            means
                .iter()
                .map(|m| Component {
                    weight: w,
                    mean: m.clone(),
                    var: vec![std * std; m.len()],
                })
                .collect(),
        )
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|d| self.components.iter().map(|c| c.weight * c.mean[d]).sum())
            .collect()
    }

    /// Per-dimension variance of the mixture.
    pub fn variance(&self) -> Vec<f64> {
        let mu = self.mean();
        (0..self.dim)
            .map(|d| {
                self.components
                    .iter()
                    .map(|c| c.weight * (c.var[d] + (c.mean[d] - mu[d]).powi(2)))
                    .sum()
            })
            .collect()
    }

    /// Draws `n` points along with the index of the component that produced each.
    pub fn sample_labeled(&self, rng: &mut Rng, n: usize) -> Result<EmpiricalSet> {
        if n == 0 {
            return Err(Error::contract("sample", "n must be at least 1"));
        }
        let mut noise = vec![0.0; n * self.dim];
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(self.pick_component(rng));
        }
        fill_standard_normal(rng, &mut noise);
        let mut data = Vec::with_capacity(n * self.dim);
        for (i, &k) in labels.iter().enumerate() {
            let c = &self.components[k];
            for d in 0..self.dim {
                data.push(c.mean[d] + c.var[d].sqrt() * noise[i * self.dim + d]);
            }
        }
        EmpiricalSet::new(
            Matrix::from_vec(n, self.dim, data)?,
            Some(labels),
            self.components.len(),
        )
    }

    fn pick_component(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                return k;
            }
        }
        // Rounding left u at or above the running total.
        self.components
            .iter()
            .rposition(|c| c.weight > 0.0)
            .unwrap_or(0)
    }
}

impl Density for GaussianMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::contract(
                "log_density",
                format!("point has dimension {}, density {}", x.len(), self.dim),
            ));
        }
        // log-sum-exp over components keeps far tails finite.
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_density(x))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    fn support_hint(&self) -> Vec<(f64, f64)> {
        (0..self.dim)
            .map(|d| {
                self.components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    let s = c.var[d].sqrt();
                    (lo.min(c.mean[d] - 8.0 * s), hi.max(c.mean[d] + 8.0 * s))
                })
            })
            .collect()
    }
}

impl Sampler for GaussianMixture {
    fn sample(&self, rng: &mut Rng, n: usize) -> Result<EmpiricalSet> {
        let mut set = self.sample_labeled(rng, n)?;
        set.clear_labels();
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::rng_from_seed;

    #[test]
    fn standard_normal_log_density_at_zero() {
        let n = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
        let expected = -0.5 * (2.0 * PI).ln();
        assert!((n.log_density(&[0.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected + 0.918_938_533_204_672_7).abs() < 1e-15);
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let mix = target("two-gauss-1d").unwrap();
        let single = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
        let a = mix.log_density(&[0.0]).unwrap();
        let b = single.log_density(&[0.0]).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn far_tails_stay_finite() {
        let mix = target("ring8").unwrap();
        assert!(mix.log_density(&[50.0, -50.0]).unwrap().is_finite());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mix = target("ring8").unwrap();
        assert!(mix.log_density(&[0.0]).is_err());
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = GaussianMixture::new(vec![Component {
            weight: 0.7,
            mean: vec![0.0],
            var: vec![1.0],
        }]);
        assert!(bad.is_err());
        assert!(GaussianMixture::gaussian_1d(0.0, 0.0).is_err());
    }

    #[test]
    fn standard_normal_sample_moments() {
        let n = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
        let s = n.sample(&mut rng_from_seed(1), 100_000).unwrap();
        let xs = s.samples().as_slice();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn degenerate_weight_samples_one_component() {
        let m = GaussianMixture::new(vec![
            Component {
                weight: 0.0,
                mean: vec![-10.0],
                var: vec![0.01],
            },
            Component {
                weight: 1.0,
                mean: vec![10.0],
                var: vec![0.01],
            },
        ])
        .unwrap();
        let s = m.sample_labeled(&mut rng_from_seed(3), 1000).unwrap();
        assert!(s.labels().unwrap().iter().all(|&l| l == 1));
        assert!(s.samples().as_slice().iter().all(|x| (x - 10.0).abs() < 1.0));
    }

    #[test]
    fn fixed_seed_reproduces_samples() {
        let m = target("ring8").unwrap();
        let a = m.sample(&mut rng_from_seed(11), 64).unwrap();
        let b = m.sample(&mut rng_from_seed(11), 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixture_moments() {
        let m = target("two-gauss-1d").unwrap();
        assert_eq!(m.mean(), vec![0.0]);
        assert_eq!(m.variance(), vec![5.0]);
    }
}
