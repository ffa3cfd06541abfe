use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ganlab::distributions::{target, GaussianMixture, TARGET_NAMES};
use ganlab::nets::{GeneratorSpec, NetSpec};
use ganlab::trainer::GameConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::registry::{self, Experiment};

pub const SCHEMA_VERSION: u32 = 1;

/// One experiment run, as read from a JSON file.
///
/// Every optional field left out takes the experiment's default, and
/// `params` is merged key by key over the default parameters. `game.seed`
/// is replaced by each entry of `seeds` in turn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_net: Option<NetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_net: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameConfig>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub params: serde_json::Value,
}

impl ExperimentConfig {
    /// A config with nothing but the experiment name and output directory.
    pub fn bare(experiment: &str, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            target: None,
            d_net: None,
            g_net: None,
            game: None,
            out_dir: out_dir.into(),
            seeds: Vec::new(),
            params: serde_json::Value::Null,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configs serialise");
        s.push('\n');
        s
    }

    /// Fills every missing field from the experiment's defaults.
    pub fn resolved(&self) -> Result<Self> {
        let exp = registry::find(&self.experiment)?;
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let defaults = (exp.defaults)();
        let params = match (&defaults.params, &self.params) {
            (serde_json::Value::Object(base), serde_json::Value::Object(over)) => {
                let mut merged = base.clone();
                for (k, v) in over {
                    merged.insert(k.clone(), v.clone());
                }
                serde_json::Value::Object(merged)
            }
            (base, serde_json::Value::Null) => base.clone(),
            (_, over) => over.clone(),
        };
        let out = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment: self.experiment.clone(),
            target: self.target.clone().or(defaults.target),
            d_net: self.d_net.clone().or(defaults.d_net),
            g_net: self.g_net.clone().or(defaults.g_net),
            game: self.game.clone().or(defaults.game),
            out_dir: self.out_dir.clone(),
            seeds: if self.seeds.is_empty() { defaults.seeds } else { self.seeds.clone() },
            params,
        };
        out.validate(exp)?;
        Ok(out)
    }

    fn validate(&self, exp: &Experiment) -> Result<()> {
        if let Some(name) = &self.target {
            if target(name).is_none() {
                return Err(CliError::Config(format!(
                    "unknown target {name:?}; known targets: {}",
                    TARGET_NAMES.join(", ")
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config(format!("{}: the seed list is empty", exp.name)));
        }
        let unique: HashSet<u64> = self.seeds.iter().copied().collect();
        if unique.len() != self.seeds.len() {
            return Err(CliError::Config("seeds must be distinct".into()));
        }
        if let (Some(game), Some(d), Some(g)) = (&self.game, &self.d_net, &self.g_net) {
            game.validate(d, g).map_err(|e| CliError::Config(e.to_string()))?;
        }
        (exp.check_params)(self)
    }

    /// The experiment-specific parameters.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.params.clone())
            .map_err(|e| CliError::Config(format!("{} params: {e}", self.experiment)))
    }

    pub fn target_mixture(&self) -> Result<GaussianMixture> {
        let name = self.target.as_deref().ok_or_else(|| missing(&self.experiment, "target"))?;
        target(name).ok_or_else(|| CliError::Config(format!("unknown target {name:?}")))
    }

    pub fn d_net(&self) -> Result<NetSpec> {
        self.d_net.clone().ok_or_else(|| missing(&self.experiment, "d_net"))
    }

    pub fn g_net(&self) -> Result<GeneratorSpec> {
        self.g_net.clone().ok_or_else(|| missing(&self.experiment, "g_net"))
    }

    /// The game configuration with its seed set to `seed`.
    pub fn game(&self, seed: u64) -> Result<GameConfig> {
        let mut game = self.game.clone().ok_or_else(|| missing(&self.experiment, "game"))?;
        game.seed = seed;
        Ok(game)
    }
}

fn missing(experiment: &str, field: &str) -> CliError {
    CliError::Config(format!("{experiment} needs a `{field}` section"))
}

/// Parameter check for experiments with typed parameters.
pub fn check_params<T: DeserializeOwned>(config: &ExperimentConfig) -> Result<()> {
    config.params::<T>().map(|_| ())
}

/// Serialises default parameters for a default config.
pub fn to_value<T: Serialize>(params: &T) -> serde_json::Value {
    serde_json::to_value(params).expect("parameters serialise")
}
