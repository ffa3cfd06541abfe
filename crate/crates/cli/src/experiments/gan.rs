//! Full GAN training on the eight-mode ring: mode collapse, unrolling and
//! minibatch features.

use ganlab::analysis::ModeReport;
use ganlab::distributions::{EmpiricalSet, GaussianMixture};
use ganlab::ndcore::{AdamConfig, OptimizerConfig};
use ganlab::nets::{Activation, GeneratorSpec, MinibatchFeatureSpec, NetSpec};
use ganlab::trainer::{sample_latent, train, write_log_csv, GameConfig};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::experiments::median;
use crate::manifest::Check;
use crate::output::Output;
use crate::run::per_seed;
use crate::svg::Plot;

/// Shared settings of the ring experiments.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Generator samples drawn after training for mode counting.
    pub eval_samples: usize,
    /// Unrolling depth of the unrolled arm.
    pub unroll_depth: usize,
    /// Discriminator minibatch features of the ablation arm.
    pub minibatch_features: MinibatchFeatureSpec,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            eval_samples: 2000,
            unroll_depth: 5,
            minibatch_features: MinibatchFeatureSpec { channels: 8, dim: 4 },
        }
    }
}

fn adam(lr: f64) -> OptimizerConfig {
    OptimizerConfig::Adam(AdamConfig {
        lr,
        beta1: 0.5,
        beta2: 0.999,
        eps: 1e-8,
    })
}

/// Two 32-unit tanh layers on each side, 2-D latent, a fast discriminator
/// (Adam 3e-3) and a slow generator (Adam 1e-4). The unrolled inner steps
/// use SGD at 0.05.
fn ring_defaults(name: &str, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = crate::experiments::base(name, seeds, &Params::default());
    cfg.target = Some("ring8".into());
    cfg.d_net = Some(NetSpec {
        hidden: vec![32, 32],
        activation: Activation::Tanh,
        ..NetSpec::default_discriminator(2)
    });
    cfg.g_net = Some(GeneratorSpec::Mlp(NetSpec {
        hidden: vec![32, 32],
        ..NetSpec::default_generator(2, 2)
    }));
    cfg.game = Some(GameConfig {
        batch_size: 128,
        steps: 8000,
        unroll_lr: 0.05,
        d_opt: adam(3e-3),
        g_opt: adam(1e-4),
        ..GameConfig::default()
    });
    cfg
}

struct Arm {
    name: &'static str,
    d_net: NetSpec,
    unroll_depth: usize,
}

/// Trains one arm, writes its artifacts and returns the mode report.
fn run_arm(cfg: &ExperimentConfig, arm: &Arm, seed: u64, p: &Params, ring: &GaussianMixture, out: &mut Output) -> Result<ModeReport> {
    let g_net = cfg.g_net()?;
    let game = GameConfig {
        unroll_depth: arm.unroll_depth,
        ..cfg.game(seed)?
    };
    let what = || format!("{} arm, seed {seed}", arm.name);
    let (state, mut rng) = train(&game, arm.d_net.clone(), g_net.clone(), ring).context(what)?;
    let z = sample_latent(game.prior, &mut rng, p.eval_samples, g_net.z_dim());
    let x = state.sample(&z).context(what)?;
    let report = ModeReport::with_defaults(&x, ring).context(what)?;

    let mut sub = out.child(arm.name);
    sub.write_with("log.csv", |w| write_log_csv(&state.log, w))?;
    let samples = EmpiricalSet::unlabeled(x.clone()).context(what)?;
    sub.write_with("samples.csv", |w| samples.write_csv(w))?;
    sub.write_with("modes.csv", |w| report.write_csv(w))?;
    let mut plot = Plot::new(&format!("{} samples, {} of 8 modes", arm.name, report.covered))
        .labels("x1", "x2")
        .equal_aspect();
    plot.dots("generator samples", (0..x.rows()).map(|r| (x.get(r, 0), x.get(r, 1))).collect(), 1.2);
    plot.dots(
        "mode centres",
        ring.components().iter().map(|c| (c.mean[0], c.mean[1])).collect(),
        3.5,
    );
    sub.text("samples.svg", &plot.render())?;
    out.absorb(sub);
    Ok(report)
}

/// Runs every arm for every seed; returns covered-mode counts indexed
/// `[arm][seed]` and writes `coverage.csv`.
fn run_arms(cfg: &ExperimentConfig, arms: &[Arm], out: &mut Output) -> Result<Vec<Vec<f64>>> {
    let p: Params = cfg.params()?;
    let ring = cfg.target_mixture()?;
    let reports = per_seed(&cfg.seeds, out, |seed, out| {
        arms.iter().map(|arm| run_arm(cfg, arm, seed, &p, &ring, out)).collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::new();
    for (seed, per_arm) in cfg.seeds.iter().zip(&reports) {
        for (arm, rep) in arms.iter().zip(per_arm) {
            rows.push(vec![
                seed.to_string(),
                arm.name.to_string(),
                rep.covered.to_string(),
                ganlab::distributions::fmt_f64(rep.high_quality_fraction),
            ]);
        }
    }
    out.records("coverage.csv", &["seed", "arm", "covered_modes", "high_quality_fraction"], &rows)?;
    Ok((0..arms.len())
        .map(|a| reports.iter().map(|r| r[a].covered as f64).collect())
        .collect())
}

fn plain(cfg: &ExperimentConfig) -> Result<Arm> {
    Ok(Arm {
        name: "plain",
        d_net: cfg.d_net()?,
        unroll_depth: 0,
    })
}

pub mod collapse {
    use super::*;

    pub fn defaults() -> ExperimentConfig {
        ring_defaults("mode-collapse", vec![1, 2, 3, 4, 5])
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        crate::config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let covered = run_arms(cfg, &[plain(cfg)?], out)?;
        Ok(vec![Check::at_most("median_covered_plain", median(&covered[0]), 4.0)])
    }
}

pub mod unrolled {
    use super::*;

    pub fn defaults() -> ExperimentConfig {
        ring_defaults("unrolled-vs-plain", vec![1, 2, 3, 4, 5])
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        crate::config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let arms = [
            plain(cfg)?,
            Arm {
                name: "unrolled",
                d_net: cfg.d_net()?,
                unroll_depth: p.unroll_depth,
            },
        ];
        let covered = run_arms(cfg, &arms, out)?;
        let (m_plain, m_unrolled) = (median(&covered[0]), median(&covered[1]));
        Ok(vec![
            Check::above("median_covered_unrolled_minus_plain", m_unrolled - m_plain, 0.0),
            Check::at_most("median_covered_plain", m_plain, 4.0),
        ])
    }
}

pub mod minibatch {
    use super::*;

    pub fn defaults() -> ExperimentConfig {
        ring_defaults("minibatch-features-ablation", vec![1, 2, 3])
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        crate::config::check_params::<Params>(cfg)
    }

    /// No built-in checks: the comparison is reported in `coverage.csv`.
    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let arms = [
            plain(cfg)?,
            Arm {
                name: "minibatch-features",
                d_net: NetSpec {
                    minibatch_features: Some(p.minibatch_features),
                    ..cfg.d_net()?
                },
                unroll_depth: 0,
            },
        ];
        run_arms(cfg, &arms, out)?;
        Ok(Vec::new())
    }
}
