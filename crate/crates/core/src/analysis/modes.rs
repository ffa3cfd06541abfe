//! Mode coverage of generated samples against a known mixture.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{fmt_f64, Density, GaussianMixture};
use crate::error::{Error, Result};
use crate::ndcore::Matrix;

/// Default coverage radius, in component standard deviations.
pub const DEFAULT_RADIUS_SIGMAS: f64 = 3.0;
/// Default count threshold, as a fraction of the sample count.
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    /// Samples whose nearest component mean is each component's.
    pub assigned: Vec<usize>,
    /// Of those, how many lie within `radius` of that mean.
    pub within_radius: Vec<usize>,
    /// Components with at least `count_threshold` samples within the radius.
    pub covered: usize,
    /// Fraction of all samples within `radius` of some component mean.
    pub high_quality_fraction: f64,
    pub count_threshold: usize,
    pub radius: f64,
}

/// Assigns each sample to its nearest component mean and counts covered modes.
pub fn mode_coverage(
    samples: &Matrix,
    mixture: &GaussianMixture,
    count_threshold: usize,
    radius: f64,
) -> Result<ModeReport> {
    if samples.rows() > 0 && samples.cols() != mixture.dim() {
        return Err(Error::contract(
            "mode_coverage",
            format!("samples have {} columns, mixture is {}-D", samples.cols(), mixture.dim()),
        ));
    }
    let comps = mixture.components();
    let mut assigned = vec![0; comps.len()];
    let mut within = vec![0; comps.len()];
    for r in 0..samples.rows() {
        let x = samples.row_slice(r);
        let (best, dist2) = comps
            .iter()
            .map(|c| c.mean.iter().zip(x).map(|(m, v)| (m - v).powi(2)).sum::<f64>())
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
        assigned[best] += 1;
        if dist2.sqrt() <= radius {
            within[best] += 1;
        }
    }
    let covered = within.iter().filter(|&&w| w >= count_threshold.max(1)).count();
    let near: usize = within.iter().sum();
    Ok(ModeReport {
        high_quality_fraction: if samples.rows() == 0 {
            0.0
        } else {
            near as f64 / samples.rows() as f64
        },
        assigned,
        within_radius: within,
        covered,
        count_threshold,
        radius,
    })
}

impl ModeReport {
    /// Coverage with the default radius (3 σ of the widest component) and
    /// threshold (1% of the samples, at least one).
    pub fn with_defaults(samples: &Matrix, mixture: &GaussianMixture) -> Result<Self> {
        let sigma = mixture
            .components()
            .iter()
            .flat_map(|c| c.var.iter())
            .fold(0.0f64, |a, &v| a.max(v.sqrt()));
        let threshold = ((DEFAULT_THRESHOLD_FRACTION * samples.rows() as f64).ceil() as usize).max(1);
        mode_coverage(samples, mixture, threshold, DEFAULT_RADIUS_SIGMAS * sigma)
    }

    /// Writes `component,assigned,within_radius,covered`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["component", "assigned", "within_radius", "covered"])?;
        for (k, (a, n)) in self.assigned.iter().zip(&self.within_radius).enumerate() {
            let covered = *n >= self.count_threshold.max(1);
            w.write_record([k.to_string(), a.to_string(), n.to_string(), (covered as u8).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "{} of {} modes covered (radius {}, threshold {} samples); high-quality fraction {}",
            self.covered,
            self.assigned.len(),
            fmt_f64(self.radius),
            self.count_threshold,
            fmt_f64(self.high_quality_fraction)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::target;

    fn ring() -> GaussianMixture {
        target("ring8").unwrap()
    }

    fn at_means(ks: &[usize], copies: usize) -> Matrix {
        let r = ring();
        let rows: Vec<Vec<f64>> = ks
            .iter()
            .flat_map(|&k| std::iter::repeat(r.components()[k].mean.clone()).take(copies))
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_mode() {
        let rep = ModeReport::with_defaults(&at_means(&[3], 50), &ring()).unwrap();
        assert_eq!(rep.covered, 1);
        assert_eq!(rep.assigned.iter().sum::<usize>(), 50);
        assert_eq!(rep.high_quality_fraction, 1.0);
    }

    #[test]
    fn all_modes() {
        let rep = ModeReport::with_defaults(&at_means(&[0, 1, 2, 3, 4, 5, 6, 7], 10), &ring()).unwrap();
        assert_eq!(rep.covered, 8);
    }

    #[test]
    fn empty_samples() {
        let rep = ModeReport::with_defaults(&Matrix::zeros(0, 2), &ring()).unwrap();
        assert_eq!(rep.covered, 0);
        assert_eq!(rep.high_quality_fraction, 0.0);
    }

    #[test]
    fn far_samples_are_assigned_but_not_counted() {
        let s = Matrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.01]]).unwrap();
        let rep = mode_coverage(&s, &ring(), 1, 0.06).unwrap();
        assert_eq!(rep.assigned.iter().sum::<usize>(), 2);
        assert_eq!(rep.covered, 1);
        assert_eq!(rep.high_quality_fraction, 0.5);
    }

    #[test]
    fn threshold_counts() {
        let s = at_means(&[0, 0, 1], 1);
        assert_eq!(mode_coverage(&s, &ring(), 2, 0.06).unwrap().covered, 1);
    }
}
