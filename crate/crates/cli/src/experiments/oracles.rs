//! Experiments with closed-form answers: the optimal discriminator, the
//! ratio it implies, generator cost curves and label smoothing.

use ganlab::analysis::{train_frozen_discriminator, FrozenDConfig, TrainedDiscriminator};
use ganlab::distributions::GaussianMixture;
use ganlab::ndcore::AdamConfig;
use ganlab::nets::NetSpec;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Context, Result};

/// `N(mean, var)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normal {
    pub mean: f64,
    pub var: f64,
}

impl Normal {
    pub fn density(self) -> Result<GaussianMixture> {
        GaussianMixture::gaussian_1d(self.mean, self.var).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// A discriminator trained against a frozen model distribution.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenSetup {
    pub data: Normal,
    pub model: Normal,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub final_lr: Option<f64>,
    /// Evaluation grid `[lo, hi]` with `points` points.
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for FrozenSetup {
    fn default() -> Self {
        let standard = FrozenDConfig::standard(1, 0);
        FrozenSetup {
            data: Normal { mean: 0.0, var: 1.0 },
            model: Normal { mean: 1.0, var: 1.0 },
            steps: standard.steps,
            batch_size: standard.batch_size,
            adam: standard.adam,
            final_lr: standard.final_lr,
            lo: -3.0,
            hi: 4.0,
            points: 701,
        }
    }
}

impl FrozenSetup {
    fn grid(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn train(&self, spec: NetSpec, seed: u64) -> Result<(GaussianMixture, GaussianMixture, TrainedDiscriminator)> {
        let (p, q) = (self.data.density()?, self.model.density()?);
        let config = FrozenDConfig {
            spec,
            steps: self.steps,
            batch_size: self.batch_size,
            adam: self.adam,
            final_lr: self.final_lr,
            seed,
        };
        let d = train_frozen_discriminator(&p, &q, &config).context(|| format!("discriminator, seed {seed}"))?;
        Ok((p, q, d))
    }
}

fn frozen_defaults<P: Serialize>(name: &str, params: &P) -> ExperimentConfig {
    let mut cfg = crate::experiments::base(name, vec![1], params);
    cfg.d_net = Some(NetSpec::default_discriminator(1));
    cfg
}

pub mod optimal_d {
    use std::f64::consts::LN_2;

    use ganlab::analysis::{expected_d_cost_at_optimum, optimal_discriminator};
    use ganlab::distributions::{js_quadrature, Grid1D};
    use ganlab::ndcore::Matrix;

    use super::*;
    use crate::config;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::run::per_seed;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub frozen: FrozenSetup,
        /// `(p_data, p_model)` pairs for the Jensen–Shannon identity.
        pub js_pairs: Vec<(Normal, Normal)>,
    }

    fn default_params() -> Params {
        let n = |mean, var| Normal { mean, var };
        Params {
            frozen: FrozenSetup::default(),
            js_pairs: vec![
                (n(0.0, 1.0), n(1.0, 1.0)),
                (n(0.0, 1.0), n(0.0, 4.0)),
                (n(-1.0, 0.5), n(2.0, 2.0)),
                (n(0.0, 1.0), n(0.0, 1.0)),
                (n(3.0, 1.0), n(-3.0, 1.0)),
            ],
        }
    }

    pub fn defaults() -> ExperimentConfig {
        frozen_defaults("optimal-d", &default_params())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let spec = cfg.d_net()?;
        let xs = p.frozen.grid();
        let maes = per_seed(&cfg.seeds, out, |seed, out| {
            let (pd, pm, d) = p.frozen.train(spec.clone(), seed)?;
            let probs = d.probabilities(&Matrix::column(xs.clone())).context(|| "evaluating D".into())?;
            let mut rows = Vec::with_capacity(xs.len());
            let mut total = 0.0;
            for (&x, &dx) in xs.iter().zip(&probs) {
                let star = optimal_discriminator(&pd, &pm, &[x]).context(|| "D*".into())?;
                total += (dx - star).abs();
                rows.push(vec![x, dx, star]);
            }
            out.table("d_vs_optimal.csv", &["x", "d", "d_star"], &rows)?;
            let mut plot = Plot::new("trained D against the optimal D*").labels("x", "D(x)");
            plot.line("trained D", rows.iter().map(|r| (r[0], r[1])).collect());
            plot.line("D*", rows.iter().map(|r| (r[0], r[2])).collect());
            out.text("d_vs_optimal.svg", &plot.render())?;
            Ok(total / xs.len() as f64)
        })?;

        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (i, (a, b)) in p.js_pairs.iter().enumerate() {
            let (pd, pm) = (a.density()?, b.density()?);
            let grid = Grid1D::covering(&[&pd, &pm]).context(|| "quadrature grid".into())?;
            let cost = expected_d_cost_at_optimum(&pd, &pm, &grid).context(|| "optimum cost".into())?;
            let js = js_quadrature(&pd, &pm, &grid).context(|| "JS".into())?;
            let lhs = 2.0 * LN_2 - 2.0 * cost;
            worst = worst.max((lhs - 2.0 * js).abs());
            rows.push(vec![i as f64, lhs, 2.0 * js]);
        }
        out.table("js_connection.csv", &["pair", "two_ln2_minus_two_cost", "two_js"], &rows)?;

        let mut checks: Vec<Check> = cfg
            .seeds
            .iter()
            .zip(&maes)
            .map(|(s, &m)| Check::below(format!("mean_abs_error[seed={s}]"), m, 0.05))
            .collect();
        checks.push(Check::below("js_connection_max_error", worst, 1e-3));
        Ok(checks)
    }
}

pub mod ratio {
    use ganlab::analysis::ratio_estimate;

    use super::*;
    use crate::config;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::run::per_seed;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub frozen: FrozenSetup,
        /// Points where either density is at or below this are not scored.
        pub density_floor: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                frozen: FrozenSetup::default(),
                density_floor: 1e-3,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        frozen_defaults("ratio-recovery", &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let spec = cfg.d_net()?;
        let xs = p.frozen.grid();
        let worst = per_seed(&cfg.seeds, out, |seed, out| {
            let (pd, pm, d) = p.frozen.train(spec.clone(), seed)?;
            let est = ratio_estimate(&d, &xs, Some((&pd, &pm))).context(|| "ratio estimate".into())?;
            out.write_with("ratio.csv", |w| est.write_csv(w))?;
            let analytic = est.analytic.clone().unwrap_or_default();
            let mut plot = Plot::new("density ratio from D/(1 - D)").labels("x", "log ratio");
            plot.line("log D/(1 - D)", est.x.iter().zip(&est.implied).map(|(&x, &r)| (x, r.ln())).collect());
            plot.line("log p_data/p_model", est.x.iter().zip(&analytic).map(|(&x, &r)| (x, r.ln())).collect());
            out.text("ratio.svg", &plot.render())?;
            let worst = est.max_relative_error(&pd, &pm, p.density_floor).context(|| "ratio error".into())?;
            Ok(worst.unwrap_or(f64::NAN))
        })?;
        Ok(cfg
            .seeds
            .iter()
            .zip(&worst)
            .map(|(s, &w)| Check::below(format!("max_ratio_rel_error[seed={s}]"), w, 0.15))
            .collect())
    }
}

pub mod cost_curves {
    use ganlab::costs::{cost_response_curve, write_curve_csv, GameVariant};

    use super::*;
    use crate::config;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        /// Interior points of `D ∈ (0, 1)`, evenly spaced.
        pub points: usize,
        /// Where the `D → 0` limits are read off.
        pub small_d: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                points: 999,
                small_d: 1e-6,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("cost-curves", vec![1], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    fn slope(variant: GameVariant, d: f64) -> Result<f64> {
        let c = cost_response_curve(variant, &[d]).context(|| format!("{} slope", variant.name()))?;
        Ok(c[0].dcost_dlogit)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let grid: Vec<f64> = (1..=p.points).map(|i| i as f64 / (p.points + 1) as f64).collect();
        let mut plot = Plot::new("generator cost against D(G(z))").labels("D(G(z))", "J(G)");
        let mut checks = Vec::new();
        for variant in GameVariant::ALL {
            let curve = cost_response_curve(variant, &grid).context(|| format!("{} curve", variant.name()))?;
            out.write_with(&format!("cost_{}.csv", variant.name()), |w| write_curve_csv(&curve, w))?;
            let rise = curve.windows(2).map(|w| w[1].cost - w[0].cost).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::below(format!("{}_max_increment", variant.name()), rise, 0.0));
            plot.line(variant.name(), curve.iter().map(|c| (c.d, c.cost)).collect());
        }
        out.text("cost_curves.svg", &plot.render())?;

        let minimax = slope(GameVariant::Minimax, p.small_d)?;
        let ns = slope(GameVariant::NonSaturating, p.small_d)?;
        let mle = slope(GameVariant::Mle, 0.99)? / slope(GameVariant::Mle, 0.5)?;
        checks.push(Check::below("minimax_slope_abs_at_small_d", minimax.abs(), 1e-5));
        checks.push(Check::below("non_saturating_slope_offset_at_small_d", (ns + 0.5).abs(), 1e-5));
        checks.push(Check::within("mle_slope_ratio_099_over_05", mle, 98.01, 99.99));
        Ok(checks)
    }
}

pub mod smoothing {
    use ganlab::analysis::optimal_discriminator;
    use ganlab::costs::{smoothed_optimal_d, smoothed_optimal_d_search, SmoothingParams};
    use ganlab::distributions::{rng_from_seed, Density};
    use rand::Rng as _;

    use super::*;
    use crate::config;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub tuples: usize,
        /// Upper end of the uniform draws for `α` and `β`.
        pub max_smoothing: f64,
        /// Smoothing drawn in the figure.
        pub plot_alpha: f64,
        pub plot_beta: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                tuples: 1000,
                max_smoothing: 0.45,
                plot_alpha: 0.1,
                plot_beta: 0.1,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("label-smoothing-optimum", vec![1], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    fn smoothing(alpha: f64, beta: f64) -> Result<SmoothingParams> {
        SmoothingParams::new(alpha, beta).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let mut rng = rng_from_seed(cfg.seeds[0]);
        let mut rows = Vec::with_capacity(p.tuples);
        let (mut worst_plain, mut worst_smoothed) = (0.0f64, 0.0f64);
        for _ in 0..p.tuples {
            let (m1, v1) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.2..4.0));
            let (m2, v2) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.2..4.0));
            let x = rng.gen_range(-3.0..3.0);
            let alpha = rng.gen_range(0.0..p.max_smoothing);
            let beta = rng.gen_range(0.0..p.max_smoothing);
            let (pd, pm) = (Normal { mean: m1, var: v1 }.density()?, Normal { mean: m2, var: v2 }.density()?);
            let (a, b) = (pd.density(&[x]).context(|| "p_data".into())?, pm.density(&[x]).context(|| "p_model".into())?);

            let plain = smoothed_optimal_d_search(a, b, SmoothingParams::NONE).context(|| "search".into())?;
            let star = optimal_discriminator(&pd, &pm, &[x]).context(|| "D*".into())?;
            let s = smoothing(alpha, beta)?;
            let found = smoothed_optimal_d_search(a, b, s).context(|| "search".into())?;
            let closed = smoothed_optimal_d(a, b, s).context(|| "closed form".into())?;
            worst_plain = worst_plain.max((plain - star).abs());
            worst_smoothed = worst_smoothed.max((found - closed).abs());
            rows.push(vec![a, b, alpha, beta, found, closed]);
        }
        out.table(
            "tuples.csv",
            &["p_data", "p_model", "alpha", "beta", "search", "closed_form"],
            &rows,
        )?;

        // The figure: data N(0, 1), model N(2, 1).
        let (pd, pm) = (Normal { mean: 0.0, var: 1.0 }.density()?, Normal { mean: 2.0, var: 1.0 }.density()?);
        let settings = [
            ("no smoothing", SmoothingParams::NONE),
            ("one-sided", smoothing(p.plot_alpha, 0.0)?),
            ("two-sided", smoothing(p.plot_alpha, p.plot_beta)?),
        ];
        let xs: Vec<f64> = (0..=400).map(|i| -4.0 + 0.025 * i as f64).collect();
        let mut table = Vec::new();
        let mut curves = vec![Vec::new(); settings.len()];
        for &x in &xs {
            let (a, b) = (pd.density(&[x]).context(|| "p_data".into())?, pm.density(&[x]).context(|| "p_model".into())?);
            let mut row = vec![x];
            for (k, (_, s)) in settings.iter().enumerate() {
                let d = smoothed_optimal_d(a, b, *s).context(|| "closed form".into())?;
                row.push(d);
                curves[k].push((x, d));
            }
            table.push(row);
        }
        out.table("smoothed_optimum.csv", &["x", "none", "one_sided", "two_sided"], &table)?;
        let mut plot = Plot::new("optimal D under label smoothing").labels("x", "D*(x)");
        for ((name, _), pts) in settings.iter().zip(curves) {
            plot.line(name, pts);
        }
        out.text("smoothed_optimum.svg", &plot.render())?;

        Ok(vec![
            Check::below("unsmoothed_search_max_error", worst_plain, 1e-6),
            Check::below("smoothed_search_max_error", worst_smoothed, 1e-6),
        ])
    }
}
