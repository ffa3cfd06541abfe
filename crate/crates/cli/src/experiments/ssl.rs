//! Semi-supervised classification with an n+1-class discriminator.

pub mod feature_matching {
    use std::f64::consts::PI;

    use ganlab::distributions::{rng_from_seed, Density, EmpiricalSet, GaussianMixture, Sampler};
    use ganlab::ndcore::Matrix;
    use ganlab::nets::{GeneratorSpec, NetSpec};
    use ganlab::trainer::{
        sample_latent, ssl_accuracy, ssl_predict, ssl_train_step, write_log_csv, GameConfig, GeneratorObjective,
        SslBatch, TrainState,
    };
    use serde::{Deserialize, Serialize};

    use crate::config::{self, ExperimentConfig};
    use crate::error::{CliError, Context, Result};
    use crate::experiments::median;
    use crate::manifest::Check;
    use crate::output::Output;
    use crate::run::per_seed;
    use crate::svg::Plot;

    /// Training draws from a stream separate from the labeled and test sets.
    const TRAIN_STREAM: u64 = 1000;

    /// Three interleaved spiral arms, one class each, every arm a chain of
    /// equal Gaussians from `r_inner` to `r_outer`.
    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub classes: usize,
        pub components_per_class: usize,
        pub r_inner: f64,
        pub r_outer: f64,
        /// Angle swept along each arm, in radians.
        pub turn: f64,
        pub std: f64,
        pub labels_per_class: usize,
        pub test_samples: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                classes: 3,
                components_per_class: 10,
                r_inner: 0.3,
                r_outer: 2.0,
                turn: 4.0,
                std: 0.1,
                labels_per_class: 10,
                test_samples: 3000,
            }
        }
    }

    impl Params {
        pub fn mixture(&self) -> Result<GaussianMixture> {
            let per = self.components_per_class;
            let mut means = Vec::with_capacity(self.classes * per);
            for k in 0..self.classes {
                for i in 0..per {
                    let t = if per > 1 { i as f64 / (per - 1) as f64 } else { 0.0 };
                    let r = self.r_inner + (self.r_outer - self.r_inner) * t;
                    let angle = self.turn * t + 2.0 * PI * k as f64 / self.classes as f64;
                    means.push(vec![r * angle.cos(), r * angle.sin()]);
                }
            }
            GaussianMixture::equal_weights(&means, self.std).map_err(|e| CliError::Config(e.to_string()))
        }
    }

    pub fn defaults() -> ExperimentConfig {
        let p = Params::default();
        let mut cfg = crate::experiments::base("ssl-feature-matching", vec![1, 2, 3, 4, 5], &p);
        cfg.d_net = Some(NetSpec {
            hidden: vec![32, 32],
            output_dim: p.classes + 1,
            ..NetSpec::default_discriminator(2)
        });
        cfg.g_net = Some(GeneratorSpec::Mlp(NetSpec {
            hidden: vec![32, 32],
            ..NetSpec::default_generator(2, 2)
        }));
        cfg.game = Some(GameConfig {
            batch_size: 64,
            steps: 5000,
            g_objective: GeneratorObjective::FeatureMatching,
            ..GameConfig::default()
        });
        cfg
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        let p: Params = cfg.params()?;
        if p.classes < 2 || p.components_per_class == 0 || p.labels_per_class == 0 {
            return Err(CliError::Config("ssl-feature-matching: need 2+ classes, components and labels".into()));
        }
        p.mixture()?;
        config::check_params::<Params>(cfg)
    }

    struct SeedResult {
        ssl: f64,
        baseline: f64,
    }

    /// Labeled points, `labels_per_class` of each class, by rejection.
    fn labeled_set(p: &Params, mix: &GaussianMixture, rng: &mut ganlab::distributions::Rng) -> Result<(Matrix, Vec<usize>)> {
        let per = p.components_per_class;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut counts = vec![0; p.classes];
        while counts.iter().any(|&c| c < p.labels_per_class) {
            let s = mix.sample_labeled(rng, 1).context(|| "labeled draw".into())?;
            let class = s.labels().expect("labeled")[0] / per;
            if counts[class] < p.labels_per_class {
                counts[class] += 1;
                rows.push(s.samples().row_slice(0).to_vec());
                labels.push(class);
            }
        }
        Ok((Matrix::from_rows(&rows).context(|| "labeled set".into())?, labels))
    }

    fn train_arm(
        cfg: &ExperimentConfig,
        seed: u64,
        mix: &GaussianMixture,
        labeled: (&Matrix, &[usize]),
        unlabeled: bool,
        classes: usize,
    ) -> Result<TrainState> {
        let game = cfg.game(seed)?;
        let (d_net, g_net) = (cfg.d_net()?, cfg.g_net()?);
        let z_dim = g_net.z_dim();
        let what = || format!("{} arm, seed {seed}", if unlabeled { "ssl" } else { "baseline" });
        let mut rng = rng_from_seed(seed + TRAIN_STREAM);
        let mut state = TrainState::new(&game, d_net, g_net, mix, &mut rng).context(what)?;
        let (none_x, none_z) = (Matrix::zeros(0, mix.dim()), Matrix::zeros(0, z_dim));
        for _ in 0..game.steps {
            let (u, z) = if unlabeled {
                let u = mix.sample(&mut rng, game.batch_size).context(what)?.samples().clone();
                (u, sample_latent(game.prior, &mut rng, game.batch_size, z_dim))
            } else {
                (none_x.clone(), none_z.clone())
            };
            let batch = SslBatch {
                labeled: labeled.0,
                labels: labeled.1,
                unlabeled: &u,
                z: &z,
            };
            ssl_train_step(&mut state, &game, &batch, classes).context(what)?;
        }
        Ok(state)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let mix = p.mixture()?;
        let per = p.components_per_class;
        let results = per_seed(&cfg.seeds, out, |seed, out| {
            let mut rng = rng_from_seed(seed);
            let (lx, ly) = labeled_set(&p, &mix, &mut rng)?;
            let test = mix.sample_labeled(&mut rng, p.test_samples).context(|| "test set".into())?;
            let ty: Vec<usize> = test.labels().expect("labeled").iter().map(|&c| c / per).collect();

            let ssl = train_arm(cfg, seed, &mix, (&lx, &ly), true, p.classes)?;
            let baseline = train_arm(cfg, seed, &mix, (&lx, &ly), false, p.classes)?;
            let acc = |s: &TrainState| ssl_accuracy(s, test.samples(), &ty).context(|| "accuracy".into());
            let result = SeedResult {
                ssl: acc(&ssl)?,
                baseline: acc(&baseline)?,
            };

            let set = EmpiricalSet::new(lx.clone(), Some(ly.clone()), p.classes).context(|| "labeled set".into())?;
            out.write_with("labeled.csv", |w| set.write_csv(w))?;
            out.write_with("ssl_log.csv", |w| write_log_csv(&ssl.log, w))?;
            let predicted = ssl_predict(&ssl, test.samples()).context(|| "predictions".into())?;
            let mut plot = Plot::new(&format!("SSL predictions, accuracy {:.3}", result.ssl))
                .labels("x1", "x2")
                .equal_aspect();
            let xs = test.samples();
            for class in 0..p.classes {
                let pts = (0..xs.rows())
                    .filter(|&r| predicted[r] == class)
                    .map(|r| (xs.get(r, 0), xs.get(r, 1)))
                    .collect();
                plot.dots(&format!("predicted class {class}"), pts, 1.2);
            }
            plot.dots("labeled", (0..lx.rows()).map(|r| (lx.get(r, 0), lx.get(r, 1))).collect(), 3.5);
            out.text("predictions.svg", &plot.render())?;
            Ok(result)
        })?;

        let rows: Vec<Vec<f64>> = cfg
            .seeds
            .iter()
            .zip(&results)
            .map(|(&s, r)| vec![s as f64, r.ssl, r.baseline, r.ssl - r.baseline])
            .collect();
        out.table("accuracy.csv", &["seed", "ssl", "baseline", "margin"], &rows)?;
        let ssl: Vec<f64> = results.iter().map(|r| r.ssl).collect();
        let margin: Vec<f64> = results.iter().map(|r| r.ssl - r.baseline).collect();
        Ok(vec![
            Check::at_least("median_ssl_accuracy", median(&ssl), 0.9),
            Check::at_least("median_margin_over_baseline", median(&margin), 0.03),
        ])
    }
}
