//! Divergences by quadrature: KL fits in each direction, the maximum
//! likelihood gradient identity and pushforward densities.

use ganlab::distributions::{Component, GaussianMixture};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A 1-D mixture as `(weight, mean, var)` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mixture1D(pub Vec<(f64, f64, f64)>);

impl Mixture1D {
    pub fn build(&self) -> Result<GaussianMixture> {
        let comps = self
            .0
            .iter()
            .map(|&(weight, m, v)| Component {
                weight,
                mean: vec![m],
                var: vec![v],
            })
            .collect();
        GaussianMixture::new(comps).map_err(|e| CliError::Config(e.to_string()))
    }
}

pub mod kl_directions {
    use std::f64::consts::LN_2;

    use ganlab::analysis::{fit_gaussian_kl, fit_grid, KlDirection, KlFitConfig};
    use ganlab::distributions::{js_quadrature, kl_quadrature, Density, Grid1D};

    use super::*;
    use crate::config::{self, ExperimentConfig};
    use crate::error::Context;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub forward: KlFitConfig,
        pub reverse: KlFitConfig,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                forward: KlFitConfig::default(),
                reverse: KlFitConfig {
                    init_mean: 1.5,
                    ..KlFitConfig::default()
                },
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        let mut cfg = crate::experiments::base("kl-directions", vec![1], &Params::default());
        cfg.target = Some("two-gauss-1d".into());
        cfg
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    fn normal(m: f64, v: f64) -> GaussianMixture {
        GaussianMixture::gaussian_1d(m, v).expect("valid normal")
    }

    /// The quadrature oracles the fits rely on, on cases with known answers.
    fn quadrature_checks(target: &GaussianMixture) -> Result<Vec<Check>> {
        let q = || "divergence quadrature".to_string();
        let (a, b) = (normal(0.0, 1.0), normal(1.0, 1.0));
        let kl = kl_quadrature(&a, &b, &Grid1D::covering(&[&a, &b]).context(q)?).context(q)?;
        let other = normal(1.0, 2.0);
        let grid = Grid1D::covering(&[target, &other]).context(q)?;
        let same = js_quadrature(target, target, &grid).context(q)?;
        let asym = (js_quadrature(target, &other, &grid).context(q)? - js_quadrature(&other, target, &grid).context(q)?).abs();
        let (far_a, far_b) = (normal(0.0, 0.01), normal(100.0, 0.01));
        let far = js_quadrature(&far_a, &far_b, &Grid1D::covering(&[&far_a, &far_b]).context(q)?).context(q)?;
        Ok(vec![
            Check::within("divergence_kl_unit_shift", kl, 0.5 - 1e-6, 0.5 + 1e-6),
            Check::at_most("divergence_js_self", same.abs(), 0.0),
            Check::at_most("divergence_js_asymmetry", asym, 1e-12),
            Check::within("divergence_js_disjoint", far, LN_2 - 1e-6, LN_2 + 1e-6),
        ])
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let target = cfg.target_mixture()?;
        let mut checks = quadrature_checks(&target)?;

        let fwd = fit_gaussian_kl(&target, KlDirection::Forward, &p.forward).context(|| "forward fit".into())?;
        let rev = fit_gaussian_kl(&target, KlDirection::Reverse, &p.reverse).context(|| "reverse fit".into())?;
        let (qf, qr) = (fwd.density().context(|| "fit".into())?, rev.density().context(|| "fit".into())?);
        let grid = fit_grid(&target).context(|| "grid".into())?;
        // Forward-direction divergence KL(p ‖ q) of both fits.
        let fwd_kl_of_rev = kl_quadrature(&target, &qr, &grid).context(|| "KL of reverse fit".into())?;
        out.records(
            "fits.csv",
            &["direction", "mean", "var", "kl_in_fit_direction", "forward_kl"],
            &[
                vec!["forward".into(), fmt(fwd.mean), fmt(fwd.var), fmt(fwd.kl), fmt(fwd.kl)],
                vec!["reverse".into(), fmt(rev.mean), fmt(rev.var), fmt(rev.kl), fmt(fwd_kl_of_rev)],
            ],
        )?;

        let xs: Vec<f64> = (0..=480).map(|i| -8.0 + i as f64 / 30.0).collect();
        let mut rows = Vec::with_capacity(xs.len());
        for &x in &xs {
            let d = |m: &GaussianMixture| m.density(&[x]).context(|| "density".into());
            rows.push(vec![x, d(&target)?, d(&qf)?, d(&qr)?]);
        }
        out.table("densities.csv", &["x", "p_data", "forward_fit", "reverse_fit"], &rows)?;
        let mut plot = Plot::new("Gaussian fits to a bimodal target").labels("x", "density");
        for (k, name) in [(1, "p_data"), (2, "argmin KL(p_data || q)"), (3, "argmin KL(q || p_data)")] {
            plot.line(name, rows.iter().map(|r| (r[0], r[k])).collect());
        }
        out.text("kl_directions.svg", &plot.render())?;

        let var = target.variance()[0];
        checks.push(Check::within("forward_mean", fwd.mean, -0.05, 0.05));
        checks.push(Check::within("forward_var", fwd.var, 0.95 * var, 1.05 * var));
        checks.push(Check::within("reverse_abs_mean", rev.mean.abs(), 1.6, 2.2));
        checks.push(Check::at_most("forward_kl_gap", fwd.kl - fwd_kl_of_rev, 0.0));
        Ok(checks)
    }

    fn fmt(v: f64) -> String {
        ganlab::distributions::fmt_f64(v)
    }
}

pub mod mle {
    use ganlab::analysis::{gradient_rel_error, mle_gradient_check, mle_gradient_monte_carlo, AffineFamily};

    use super::*;
    use crate::config::{self, ExperimentConfig};
    use crate::error::Context;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::run::per_seed;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Case {
        pub family: AffineFamily,
        pub data: Mixture1D,
    }

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub cases: Vec<Case>,
        /// The Monte-Carlo route runs on this case once per seed.
        pub monte_carlo: Case,
        pub samples: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            let n = |m, v| Mixture1D(vec![(1.0, m, v)]);
            let fam = |s, b| AffineFamily::new(s, b).expect("valid family");
            let loc = Case {
                family: AffineFamily::location(0.0).expect("valid family"),
                data: n(2.0, 1.0),
            };
            Params {
                cases: vec![
                    loc.clone(),
                    Case { family: fam(1.0, 0.0), data: n(2.0, 1.0) },
                    Case { family: fam(0.5, 1.0), data: n(-1.0, 2.0) },
                    Case { family: fam(-2.0, 0.3), data: n(0.0, 1.0) },
                    Case {
                        family: fam(1.5, 0.5),
                        data: Mixture1D(vec![(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]),
                    },
                ],
                monte_carlo: loc,
                samples: 100_000,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("mle-gradient", vec![1, 2, 3, 4, 5], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        let p: Params = cfg.params()?;
        for c in p.cases.iter().chain([&p.monte_carlo]) {
            c.data.build()?;
            if c.data.0.is_empty() {
                return Err(CliError::Config("mle-gradient: empty data mixture".into()));
            }
        }
        config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (i, case) in p.cases.iter().enumerate() {
            let data = case.data.build()?;
            let check = mle_gradient_check(case.family, &data).context(|| format!("quadrature case {i}"))?;
            worst = worst.max(check.rel_error);
            for (k, (g, kl)) in check.gan_grad.iter().zip(&check.kl_grad).enumerate() {
                rows.push(vec![i as f64, k as f64, *g, *kl, check.rel_error]);
            }
        }
        out.table("quadrature.csv", &["case", "parameter", "gan_grad", "kl_grad", "rel_error"], &rows)?;

        let mc = &p.monte_carlo;
        let data = mc.data.build()?;
        let truth = mle_gradient_check(mc.family, &data).context(|| "Monte-Carlo reference".into())?.kl_grad;
        let estimates = per_seed(&cfg.seeds, out, |seed, _| {
            mle_gradient_monte_carlo(mc.family, &data, p.samples, seed).context(|| format!("Monte-Carlo seed {seed}"))
        })?;
        let mut mc_rows = Vec::new();
        let mut mc_worst = 0.0f64;
        let mut plot = Plot::new("Monte-Carlo MLE gradient by seed").labels("seed", "gradient");
        for (k, kl) in truth.iter().enumerate() {
            let mut pts = Vec::new();
            for (&seed, est) in cfg.seeds.iter().zip(&estimates) {
                mc_rows.push(vec![seed as f64, k as f64, est[k], *kl]);
                pts.push((seed as f64, est[k]));
            }
            plot.dots(&format!("estimate, parameter {k}"), pts, 4.0);
            let (lo, hi) = cfg.seeds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| {
                (a.min(s as f64), b.max(s as f64))
            });
            plot.line(&format!("KL gradient, parameter {k}"), vec![(lo, *kl), (hi, *kl)]);
        }
        for est in &estimates {
            mc_worst = mc_worst.max(gradient_rel_error(est, &truth));
        }
        out.table("monte_carlo.csv", &["seed", "parameter", "estimate", "kl_grad"], &mc_rows)?;
        out.text("monte_carlo.svg", &plot.render())?;
        Ok(vec![
            Check::below("quadrature_max_rel_error", worst, 1e-3),
            Check::below("monte_carlo_max_rel_error", mc_worst, 0.05),
        ])
    }
}

pub mod pushforward {
    use std::cell::RefCell;

    use ganlab::distributions::{
        fill_standard_normal, rng_from_seed, Density, Grid1D, MonotoneMap, Pushforward1D,
    };

    use super::*;
    use crate::config::{self, ExperimentConfig};
    use crate::error::Context;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::svg::Plot;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub map: MonotoneMap,
        pub samples: usize,
        /// Histogram range and bin count; every bin is scored.
        pub lo: f64,
        pub hi: f64,
        pub bins: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                map: MonotoneMap::CubicPlusLinear,
                samples: 1_000_000,
                lo: -1.0,
                hi: 1.0,
                bins: 10,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("pushforward-check", vec![1], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    fn std_normal() -> GaussianMixture {
        GaussianMixture::gaussian_1d(0.0, 1.0).expect("valid normal")
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let ctx = || "pushforward".to_string();

        let mut rows = Vec::new();
        let mut worst_mass = 0.0f64;
        for map in MonotoneMap::registered() {
            let pf = Pushforward1D::new(std_normal(), map).context(ctx)?;
            let (lo, hi) = pf.support_hint()[0];
            let grid = Grid1D::new(lo, hi, 1 << 16).context(ctx)?;
            let failure = RefCell::new(None);
            let mass = grid.integrate(|x| {
                pf.density(&[x]).unwrap_or_else(|e| {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                })
            });
            if let Some(e) = failure.into_inner() {
                return Err(e).context(ctx);
            }
            worst_mass = worst_mass.max((mass - 1.0).abs());
            rows.push(vec![format!("{map:?}"), ganlab::distributions::fmt_f64(mass)]);
        }
        out.records("normalisation.csv", &["map", "mass"], &rows)?;

        let pf = Pushforward1D::new(std_normal(), p.map).context(ctx)?;
        let mut z = vec![0.0; p.samples];
        fill_standard_normal(&mut rng_from_seed(cfg.seeds[0]), &mut z);
        let width = (p.hi - p.lo) / p.bins as f64;
        let mut counts = vec![0usize; p.bins];
        for &zi in &z {
            let x = p.map.apply(zi);
            if x >= p.lo && x < p.hi {
                counts[(((x - p.lo) / width) as usize).min(p.bins - 1)] += 1;
            }
        }
        let mut table = Vec::new();
        let mut worst_bin = 0.0f64;
        for (b, &c) in counts.iter().enumerate() {
            let (a, e) = (p.lo + b as f64 * width, p.lo + (b + 1) as f64 * width);
            let empirical = c as f64 / (p.samples as f64 * width);
            // Simpson's rule average of the density over the bin.
            let f = |x: f64| pf.pushforward_density(x).context(ctx);
            let analytic = (f(a)? + 4.0 * f(0.5 * (a + e))? + f(e)?) / 6.0;
            worst_bin = worst_bin.max((empirical / analytic - 1.0).abs());
            table.push(vec![a, e, empirical, analytic]);
        }
        out.table("histogram.csv", &["bin_lo", "bin_hi", "empirical", "analytic"], &table)?;

        let mut plot = Plot::new("sample histogram against the pushforward density").labels("x", "density");
        let steps: Vec<(f64, f64)> = table.iter().flat_map(|r| [(r[0], r[2]), (r[1], r[2])]).collect();
        plot.line("histogram", steps);
        let xs: Vec<f64> = (0..=200).map(|i| p.lo + (p.hi - p.lo) * i as f64 / 200.0).collect();
        let mut curve = Vec::with_capacity(xs.len());
        for &x in &xs {
            curve.push((x, pf.pushforward_density(x).context(ctx)?));
        }
        plot.line("p_z(g⁻¹(x)) |dg⁻¹/dx|", curve);
        out.text("histogram.svg", &plot.render())?;

        Ok(vec![
            Check::below("max_normalisation_error", worst_mass, 1e-6),
            Check::below("max_bin_rel_error", worst_bin, 0.03),
        ])
    }
}
