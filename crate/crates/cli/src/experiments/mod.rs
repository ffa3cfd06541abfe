//! The registered experiments. Each submodule exposes `defaults`,
//! `check_params` and `run`.

pub mod divergences;
pub mod gan;
pub mod games;
pub mod oracles;
pub mod ssl;

use serde::Serialize;

use crate::config::{self, ExperimentConfig};

/// A default config writing under `runs/<name>`.
pub(crate) fn base<P: Serialize>(name: &str, seeds: Vec<u64>, params: &P) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::bare(name, format!("runs/{name}"));
    cfg.seeds = seeds;
    cfg.params = config::to_value(params);
    cfg
}

/// Middle value, or the mean of the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::median;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
