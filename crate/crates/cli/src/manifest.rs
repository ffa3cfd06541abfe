use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// A built-in pass/fail check. `threshold` is the human-readable rule the
/// value was held to, such as `"< 0.05"` or `"in [12, 20]"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub pass: bool,
}

impl Check {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("< {}", num(limit)), value < limit)
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("<= {}", num(limit)), value <= limit)
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!("> {}", num(limit)), value > limit)
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self::new(name, value, format!(">= {}", num(limit)), value >= limit)
    }

    /// Closed interval.
    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self::new(name, value, format!("in [{}, {}]", num(lo), num(hi)), value >= lo && value <= hi)
    }

    fn new(name: impl Into<String>, value: f64, threshold: String, pass: bool) -> Self {
        Check {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass { "pass" } else { "FAIL" };
        format!("{verdict} {} = {} ({})", self.name, num(self.value), self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_are_exact_and_readable() {
        let c = Check::below("err", 5.2e-14, 1e-4);
        assert_eq!(c.threshold, "< 1e-4");
        assert!(c.pass);
        assert_eq!(Check::within("f", 16.0, 12.0, 20.0).threshold, "in [12, 20]");
        assert!(!Check::below("nan", f64::NAN, 1.0).pass);
        assert!(!Check::at_most("gap", 0.1, 0.0).pass);
        assert_eq!(num(0.05), "0.05");
        assert_eq!(num(98.01), "98.01");
        assert_eq!(num(-2.5e-7), "-2.5e-7");
    }
}

/// Plain decimals for ordinary magnitudes, exponent form otherwise.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    /// The resolved configuration, defaults filled in.
    pub config: ExperimentConfig,
    /// Relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub elapsed_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifests serialise");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }
}
