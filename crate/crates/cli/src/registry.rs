use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiments::{divergences, gan, games, oracles, ssl};
use crate::manifest::Check;
use crate::output::Output;

pub type RunFn = fn(&ExperimentConfig, &mut Output) -> Result<Vec<Check>>;

pub struct Experiment {
    pub name: &'static str,
    /// The concept the experiment demonstrates.
    pub topic: &'static str,
    pub description: &'static str,
    pub defaults: fn() -> ExperimentConfig,
    pub check_params: fn(&ExperimentConfig) -> Result<()>,
    pub run: RunFn,
}

macro_rules! experiment {
    ($name:literal, $topic:literal, $desc:literal, $module:ident :: $prefix:ident) => {
        Experiment {
            name: $name,
            topic: $topic,
            description: $desc,
            defaults: $module::$prefix::defaults,
            check_params: $module::$prefix::check_params,
            run: $module::$prefix::run,
        }
    };
}

pub static EXPERIMENTS: [Experiment; 13] = [
    experiment!(
        "xy-orbit",
        "Game dynamics: the x·y saddle",
        "continuous-time gradient play orbits the equilibrium forever",
        games::orbit
    ),
    experiment!(
        "xy-discrete-spiral",
        "Game dynamics: the x·y saddle",
        "simultaneous gradient steps spiral outward by sqrt(1 + eta^2) per step",
        games::spiral
    ),
    experiment!(
        "optimal-d",
        "The optimal discriminator",
        "a discriminator trained against a frozen generator approaches D*",
        oracles::optimal_d
    ),
    experiment!(
        "ratio-recovery",
        "The density ratio trick",
        "D/(1 - D) from a trained classifier recovers p_data/p_model",
        oracles::ratio
    ),
    experiment!(
        "cost-curves",
        "Generator costs as functions of D",
        "minimax, non-saturating and maximum-likelihood costs and their logit gradients",
        oracles::cost_curves
    ),
    experiment!(
        "label-smoothing-optimum",
        "One-sided label smoothing",
        "pointwise search for the smoothed discriminator optimum against the closed form",
        oracles::smoothing
    ),
    experiment!(
        "kl-directions",
        "Forward and reverse KL",
        "a single Gaussian fitted to a bimodal target under each KL direction",
        divergences::kl_directions
    ),
    experiment!(
        "mle-gradient",
        "Maximum likelihood as a GAN",
        "the MLE generator cost has the expected gradient of KL(p_data || p_g)",
        divergences::mle
    ),
    experiment!(
        "mode-collapse",
        "Mode collapse",
        "plain GAN training on a ring of eight Gaussians",
        gan::collapse
    ),
    experiment!(
        "unrolled-vs-plain",
        "Mode collapse and unrolled GANs",
        "mode coverage with and without unrolling the discriminator",
        gan::unrolled
    ),
    experiment!(
        "minibatch-features-ablation",
        "Minibatch features",
        "mode coverage with and without minibatch features in the discriminator",
        gan::minibatch
    ),
    experiment!(
        "ssl-feature-matching",
        "Semi-supervised learning with GANs",
        "an n+1-class discriminator with a feature-matching generator versus a labels-only classifier",
        ssl::feature_matching
    ),
    experiment!(
        "pushforward-check",
        "Generators as pushforwards",
        "the change-of-variables density of a monotone generator against sample histograms",
        divergences::pushforward
    ),
];

pub fn find(name: &str) -> Result<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| {
        let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        CliError::Config(format!("unknown experiment {name:?}; registered experiments: {}", names.join(", ")))
    })
}

/// One aligned line per experiment: name, topic, description.
pub fn table() -> String {
    let w = EXPERIMENTS.iter().map(|e| e.name.len()).max().unwrap_or(0);
    let t = EXPERIMENTS.iter().map(|e| e.topic.len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in &EXPERIMENTS {
        out.push_str(&format!("{:w$}  {:t$}  {}\n", e.name, e.topic, e.description));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_exactly_the_experiment_set() {
        let mut names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name).collect();
        names.sort_unstable();
        let mut expected = [
            "xy-orbit",
            "xy-discrete-spiral",
            "optimal-d",
            "ratio-recovery",
            "cost-curves",
            "label-smoothing-optimum",
            "kl-directions",
            "mle-gradient",
            "mode-collapse",
            "unrolled-vs-plain",
            "minibatch-features-ablation",
            "ssl-feature-matching",
            "pushforward-check",
        ];
        expected.sort_unstable();
        assert_eq!(names, expected);
    }

    #[test]
    fn unknown_name_lists_the_registry() {
        let err = find("xy-orbits").err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("xy-discrete-spiral"));
    }

    #[test]
    fn defaults_resolve_and_name_themselves() {
        for e in &EXPERIMENTS {
            let cfg = (e.defaults)();
            assert_eq!(cfg.experiment, e.name);
            cfg.resolved().unwrap();
        }
        assert_eq!(table(), table());
        assert_eq!(table().lines().count(), 13);
    }
}
