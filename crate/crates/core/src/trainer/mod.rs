//! Gradient-based play of the two-player game.
//!
//! Each step samples fresh minibatches, takes `d_steps` discriminator updates
//! and one generator update. With one discriminator step and the
//! simultaneous schedule, both gradients come from the same minibatches and
//! are computed before either player moves.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::costs::{self, GameVariant, SmoothingParams};
use crate::distributions::{fill_standard_normal, fmt_f64, Rng, Sampler};
use crate::error::{Error, Result};
use crate::ndcore::{AdamConfig, Matrix, Optimizer, OptimizerConfig, Tape, Var};
use crate::nets::{self, BatchContext, GeneratorSpec, NetParams, NetSpec, Role};

mod ssl;
mod unroll;

pub use ssl::{
    ssl_accuracy, ssl_predict, ssl_real_logit, ssl_real_probability, ssl_supervised_loss,
    ssl_train_step, SslBatch,
};
pub use unroll::unrolled_g_grad;

/// Logits beyond this magnitude count as divergence.
pub const LOGIT_DIVERGENCE: f64 = 1e3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// With `d_steps = 1`, both gradients are taken before either update.
    #[default]
    Simultaneous,
    /// Discriminator steps first, then the generator sees the updated D.
    Sequential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPrior {
    #[default]
    Normal,
    /// Uniform on `[-1, 1]` per coordinate.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorObjective {
    /// The generator cost selected by `variant`.
    #[default]
    Game,
    /// Match mean discriminator features of data and samples.
    FeatureMatching,
}

fn default_d_steps() -> usize {
    1
}

fn default_unroll_lr() -> f64 {
    0.1
}

fn default_adam() -> OptimizerConfig {
    OptimizerConfig::Adam(AdamConfig {
        lr: 1e-3,
        beta1: 0.5,
        beta2: 0.999,
        eps: 1e-8,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub variant: GameVariant,
    #[serde(default)]
    pub smoothing: SmoothingParams,
    #[serde(default = "default_d_steps")]
    pub d_steps: usize,
    #[serde(default)]
    pub unroll_depth: usize,
    /// Step size of the SGD updates inside the unrolled graph.
    #[serde(default = "default_unroll_lr")]
    pub unroll_lr: f64,
    #[serde(default = "default_adam")]
    pub d_opt: OptimizerConfig,
    #[serde(default = "default_adam")]
    pub g_opt: OptimizerConfig,
    pub batch_size: usize,
    #[serde(default)]
    pub prior: LatentPrior,
    pub steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub g_objective: GeneratorObjective,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            variant: GameVariant::NonSaturating,
            smoothing: SmoothingParams::NONE,
            d_steps: 1,
            unroll_depth: 0,
            unroll_lr: default_unroll_lr(),
            d_opt: default_adam(),
            g_opt: default_adam(),
            batch_size: 64,
            prior: LatentPrior::Normal,
            steps: 1000,
            seed: 0,
            schedule: Schedule::Simultaneous,
            g_objective: GeneratorObjective::Game,
        }
    }
}

impl GameConfig {
    pub fn validate(&self, d_spec: &NetSpec, g_spec: &GeneratorSpec) -> Result<()> {
        let fail = |detail: String| Err(Error::contract("GameConfig", detail));
        self.smoothing.validate()?;
        d_spec.validate()?;
        if let GeneratorSpec::Mlp(s) = g_spec {
            s.validate()?;
            if s.role != Role::Generator {
                return fail("generator spec has the discriminator role".into());
            }
        }
        if d_spec.role != Role::Discriminator {
            return fail("discriminator spec has the generator role".into());
        }
        if d_spec.condition_classes > 0 {
            return fail("the trainer does not feed class labels to the discriminator".into());
        }
        if d_spec.input_dim != g_spec.x_dim() {
            return fail(format!(
                "discriminator reads {} dims but the generator emits {}",
                d_spec.input_dim,
                g_spec.x_dim()
            ));
        }
        if self.d_steps == 0 {
            return fail("d_steps must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive".into());
        }
        let batch_stats = d_spec.uses_batch_statistics() || g_spec.uses_batch_statistics();
        if batch_stats && self.batch_size < 2 {
            return fail("batch statistics need batch_size >= 2".into());
        }
        if !(self.unroll_lr >= 0.0) {
            return fail(format!("unroll_lr {} must be >= 0", self.unroll_lr));
        }
        if self.unroll_depth > 0 {
            unroll::check_unrollable(d_spec)?;
            if self.g_objective != GeneratorObjective::Game {
                return fail("unrolling applies to the game objective only".into());
            }
        }
        Ok(())
    }

    fn simultaneous(&self) -> bool {
        self.schedule == Schedule::Simultaneous && self.d_steps == 1
    }
}

/// One row of the per-step scalar log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub j_d: f64,
    pub j_g: f64,
    pub mean_d_data: f64,
    pub mean_d_samples: f64,
}

pub fn write_log_csv<W: Write>(rows: &[LogRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["step", "j_d", "j_g", "mean_d_data", "mean_d_samples"])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            fmt_f64(r.j_d),
            fmt_f64(r.j_g),
            fmt_f64(r.mean_d_data),
            fmt_f64(r.mean_d_samples),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Draws `n` latent rows from `prior`.
pub fn sample_latent(prior: LatentPrior, rng: &mut Rng, n: usize, dim: usize) -> Matrix {
    use rand::Rng as _;
    let mut data = vec![0.0; n * dim];
    match prior {
        LatentPrior::Normal => fill_standard_normal(rng, &mut data),
        LatentPrior::Uniform => data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0)),
    }
    Matrix::from_vec(n, dim, data).expect("sized above")
}

/// A data batch and a latent batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch {
    pub x: Matrix,
    pub z: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub d_spec: NetSpec,
    pub g_spec: GeneratorSpec,
    pub d_params: NetParams,
    pub g_params: NetParams,
    pub d_opt: Optimizer,
    pub g_opt: Optimizer,
    pub step: usize,
    pub log: Vec<LogRow>,
}

impl TrainState {
    /// Initialises both players. Reference batches, when a network needs one,
    /// are drawn here once and then frozen.
    pub fn new(
        config: &GameConfig,
        d_spec: NetSpec,
        g_spec: GeneratorSpec,
        data: &dyn Sampler,
        rng: &mut Rng,
    ) -> Result<Self> {
        config.validate(&d_spec, &g_spec)?;
        let mut d_params = d_spec.init(rng)?;
        let mut g_params = g_spec.init(rng)?;
        if d_spec.uses_reference() {
            d_params.reference = Some(data.sample(rng, config.batch_size)?.samples().clone());
        }
        if g_spec.uses_reference() {
            g_params.reference =
                Some(sample_latent(config.prior, rng, config.batch_size, g_spec.z_dim()));
        }
        Ok(TrainState {
            d_opt: Optimizer::new(config.d_opt, d_params.len())?,
            g_opt: Optimizer::new(config.g_opt, g_params.len())?,
            d_spec,
            g_spec,
            d_params,
            g_params,
            step: 0,
            log: Vec::new(),
        })
    }

    pub fn minibatch(&self, config: &GameConfig, data: &dyn Sampler, rng: &mut Rng) -> Result<Minibatch> {
        let x = data.sample(rng, config.batch_size)?.samples().clone();
        let z = sample_latent(config.prior, rng, config.batch_size, self.g_spec.z_dim());
        Ok(Minibatch { x, z })
    }

    /// Generator forward pass on the tape.
    pub fn generate_on(&self, tape: &mut Tape, g_vars: &[Var], z: Var) -> Result<Var> {
        let ctx = match &self.g_spec {
            GeneratorSpec::Mlp(s) => BatchContext::for_params(s, &self.g_params)?,
            _ => BatchContext::plain(),
        };
        self.g_spec.forward(tape, g_vars, z, &ctx)
    }

    /// Discriminator forward pass on the tape.
    pub fn discriminate_on(&self, tape: &mut Tape, d_vars: &[Var], x: Var) -> Result<nets::Forward> {
        let ctx = BatchContext::for_params(&self.d_spec, &self.d_params)?;
        nets::discriminator_forward(tape, &self.d_spec, d_vars, x, &ctx)
    }

    /// Samples from the current generator.
    pub fn sample(&self, z: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let g = self.g_params.bind_constant(&mut tape);
        let zv = tape.constant(z.clone());
        let x = self.generate_on(&mut tape, &g, zv)?;
        Ok(tape.value(x).clone())
    }

    /// Discriminator probabilities `σ(a(x))` for each row of `x`.
    pub fn d_probabilities(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let d = self.d_params.bind_constant(&mut tape);
        let xv = tape.constant(x.clone());
        let f = self.discriminate_on(&mut tape, &d, xv)?;
        Ok(tape.value(f.output).as_slice().iter().map(|&a| crate::ndcore::sigmoid(a)).collect())
    }

    fn diverged(&self) -> Error {
        Error::Diverged {
            step: self.step,
            last: self.log.last().map(|r| Box::new(*r)),
        }
    }

    /// Fails with `Diverged` on a non-finite loss or an extreme logit.
    pub(crate) fn guard(&self, tape: &Tape, loss: Var, logits: &[Var]) -> Result<f64> {
        let value = tape.scalar_value(loss)?;
        let wild = logits.iter().any(|&l| {
            tape.value(l).as_slice().iter().any(|a| !(a.abs() <= LOGIT_DIVERGENCE))
        });
        if !value.is_finite() || wild {
            return Err(self.diverged());
        }
        Ok(value)
    }

    pub(crate) fn backward(&self, tape: &Tape, loss: Var) -> Result<crate::ndcore::Gradients> {
        tape.backward(loss).map_err(|e| match e {
            Error::NumericFault { .. } => self.diverged(),
            other => other,
        })
    }
}

pub(crate) fn mean_sigmoid(tape: &Tape, logits: Var) -> f64 {
    let v = tape.value(logits).as_slice();
    v.iter().map(|&a| crate::ndcore::sigmoid(a)).sum::<f64>() / v.len() as f64
}

struct DiscriminatorGrad {
    grad: Vec<f64>,
    j_d: f64,
    mean_d_data: f64,
    mean_d_samples: f64,
}

fn discriminator_gradient(
    state: &TrainState,
    config: &GameConfig,
    batch: &Minibatch,
) -> Result<DiscriminatorGrad> {
    let mut tape = Tape::new();
    let d = state.d_params.bind(&mut tape);
    let g = state.g_params.bind_constant(&mut tape);
    let x = tape.constant(batch.x.clone());
    let z = tape.constant(batch.z.clone());
    let fake = state.generate_on(&mut tape, &g, z)?;
    let on_data = state.discriminate_on(&mut tape, &d, x)?.output;
    let on_fake = state.discriminate_on(&mut tape, &d, fake)?.output;
    let loss = costs::d_cost(&mut tape, on_data, on_fake, config.smoothing)?;
    let j_d = state.guard(&tape, loss, &[on_data, on_fake])?;
    let grads = state.backward(&tape, loss)?;
    Ok(DiscriminatorGrad {
        grad: state.d_params.flat_grad(&grads, &d)?,
        j_d,
        mean_d_data: mean_sigmoid(&tape, on_data),
        mean_d_samples: mean_sigmoid(&tape, on_fake),
    })
}

/// `‖mean(f_data) − mean(f_samples)‖²` over batch-mean feature vectors.
pub fn feature_match_loss(tape: &mut Tape, f_data: Var, f_samples: Var) -> Result<Var> {
    let (a, b) = (tape.value(f_data), tape.value(f_samples));
    if a.cols() != b.cols() {
        return Err(Error::contract(
            "feature_match_loss",
            format!("feature widths differ: {} vs {}", a.cols(), b.cols()),
        ));
    }
    if a.rows() == 0 || b.rows() == 0 {
        return Err(Error::contract("feature_match_loss", "empty feature batch"));
    }
    let ma = tape.mean_rows(f_data)?;
    let mb = tape.mean_rows(f_samples)?;
    let diff = tape.sub(ma, mb)?;
    let sq = tape.square(diff)?;
    Ok(tape.sum(sq))
}

/// Generator loss and gradient with `depth` unrolled discriminator steps;
/// `depth = 0` is the ordinary generator gradient.
pub(crate) fn generator_gradient(
    state: &TrainState,
    config: &GameConfig,
    batch: &Minibatch,
    depth: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut tape = Tape::new();
    let g = state.g_params.bind(&mut tape);
    let d = state.d_params.bind_constant(&mut tape);
    let z = tape.constant(batch.z.clone());
    let fake = state.generate_on(&mut tape, &g, z)?;
    let (loss, logits) = if depth > 0 {
        let x = tape.constant(batch.x.clone());
        let d_k = unroll::unrolled_discriminator(
            &mut tape,
            &state.d_spec,
            d,
            x,
            fake,
            config.smoothing,
            config.unroll_lr,
            depth,
        )?;
        let on_fake = state.discriminate_on(&mut tape, &d_k, fake)?.output;
        (costs::g_cost(&mut tape, config.variant, on_fake)?, vec![on_fake])
    } else {
        match config.g_objective {
            GeneratorObjective::Game => {
                let on_fake = state.discriminate_on(&mut tape, &d, fake)?.output;
                (costs::g_cost(&mut tape, config.variant, on_fake)?, vec![on_fake])
            }
            GeneratorObjective::FeatureMatching => {
                let x = tape.constant(batch.x.clone());
                let on_data = state.discriminate_on(&mut tape, &d, x)?;
                let on_fake = state.discriminate_on(&mut tape, &d, fake)?;
                let loss = feature_match_loss(&mut tape, on_data.features, on_fake.features)?;
                (loss, vec![on_data.output, on_fake.output])
            }
        }
    };
    let j_g = state.guard(&tape, loss, &logits)?;
    let grads = state.backward(&tape, loss)?;
    Ok((j_g, state.g_params.flat_grad(&grads, &g)?))
}

/// One training step: `d_steps` discriminator updates, then one generator
/// update, then one log row.
pub fn train_step(
    state: &mut TrainState,
    config: &GameConfig,
    data: &dyn Sampler,
    rng: &mut Rng,
) -> Result<()> {
    if state.d_spec.output_dim != 1 {
        return Err(Error::contract(
            "train_step",
            "discriminator must emit one logit; n + 1 class heads train with ssl_train_step",
        ));
    }
    let row = if config.simultaneous() {
        let batch = state.minibatch(config, data, rng)?;
        let dg = discriminator_gradient(state, config, &batch)?;
        let (j_g, gg) = generator_gradient(state, config, &batch, config.unroll_depth)?;
        state.d_opt.step(&mut state.d_params.theta, &dg.grad)?;
        state.g_opt.step(&mut state.g_params.theta, &gg)?;
        LogRow {
            step: state.step,
            j_d: dg.j_d,
            j_g,
            mean_d_data: dg.mean_d_data,
            mean_d_samples: dg.mean_d_samples,
        }
    } else {
        let mut last = None;
        for _ in 0..config.d_steps {
            let batch = state.minibatch(config, data, rng)?;
            let dg = discriminator_gradient(state, config, &batch)?;
            state.d_opt.step(&mut state.d_params.theta, &dg.grad)?;
            last = Some(dg);
        }
        let dg = last.expect("d_steps >= 1");
        let batch = state.minibatch(config, data, rng)?;
        let (j_g, gg) = generator_gradient(state, config, &batch, config.unroll_depth)?;
        state.g_opt.step(&mut state.g_params.theta, &gg)?;
        LogRow {
            step: state.step,
            j_d: dg.j_d,
            j_g,
            mean_d_data: dg.mean_d_data,
            mean_d_samples: dg.mean_d_samples,
        }
    };
    state.log.push(row);
    state.step += 1;
    Ok(())
}

/// Builds a state from `config.seed` and runs `config.steps` steps.
pub fn train(
    config: &GameConfig,
    d_spec: NetSpec,
    g_spec: GeneratorSpec,
    data: &dyn Sampler,
) -> Result<(TrainState, Rng)> {
    let mut rng = crate::distributions::rng_from_seed(config.seed);
    let mut state = TrainState::new(config, d_spec, g_spec, data, &mut rng)?;
    for _ in 0..config.steps {
        train_step(&mut state, config, data, &mut rng)?;
    }
    Ok((state, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{rng_from_seed, GaussianMixture};

    fn small_d() -> NetSpec {
        NetSpec {
            hidden: vec![8, 8],
            ..NetSpec::default_discriminator(1)
        }
    }

    fn small_g() -> GeneratorSpec {
        GeneratorSpec::Mlp(NetSpec {
            hidden: vec![8],
            ..NetSpec::default_generator(1, 1)
        })
    }

    fn config() -> GameConfig {
        GameConfig {
            batch_size: 16,
            steps: 5,
            ..GameConfig::default()
        }
    }

    #[test]
    fn zero_learning_rates_freeze_parameters() {
        let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
        let cfg = GameConfig {
            d_opt: OptimizerConfig::Sgd { lr: 0.0 },
            g_opt: OptimizerConfig::Sgd { lr: 0.0 },
            ..config()
        };
        let mut rng = rng_from_seed(3);
        let mut state = TrainState::new(&cfg, small_d(), small_g(), &data, &mut rng).unwrap();
        let before = state.clone();
        for _ in 0..4 {
            train_step(&mut state, &cfg, &data, &mut rng).unwrap();
        }
        assert_eq!(state.d_params, before.d_params);
        assert_eq!(state.g_params, before.g_params);
        assert_eq!(state.log.len(), 4);
        assert_eq!(state.step, 4);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
        let (a, _) = train(&config(), small_d(), small_g(), &data).unwrap();
        let (b, _) = train(&config(), small_d(), small_g(), &data).unwrap();
        assert_eq!(a, b);
        let mut sa = Vec::new();
        let mut sb = Vec::new();
        write_log_csv(&a.log, &mut sa).unwrap();
        write_log_csv(&b.log, &mut sb).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn each_update_only_touches_its_owner() {
        let data = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
        let cfg = config();
        let mut rng = rng_from_seed(5);
        let mut state = TrainState::new(&cfg, small_d(), small_g(), &data, &mut rng).unwrap();
        let batch = state.minibatch(&cfg, &data, &mut rng).unwrap();

        let g_before = state.g_params.clone();
        let dg = discriminator_gradient(&state, &cfg, &batch).unwrap();
        state.d_opt.step(&mut state.d_params.theta, &dg.grad).unwrap();
        assert_eq!(state.g_params, g_before);

        let d_before = state.d_params.clone();
        let (_, gg) = generator_gradient(&state, &cfg, &batch, 0).unwrap();
        state.g_opt.step(&mut state.g_params.theta, &gg).unwrap();
        assert_eq!(state.d_params, d_before);
        assert_ne!(state.g_params, g_before);
    }

    #[test]
    fn sequential_schedule_logs_every_step() {
        let data = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
        let cfg = GameConfig {
            d_steps: 3,
            schedule: Schedule::Sequential,
            ..config()
        };
        let (state, _) = train(&cfg, small_d(), small_g(), &data).unwrap();
        assert_eq!(state.log.len(), cfg.steps);
        assert!(state.log.iter().enumerate().all(|(i, r)| r.step == i));
    }

    #[test]
    fn divergence_carries_step_and_last_row() {
        let data = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
        let cfg = GameConfig {
            d_opt: OptimizerConfig::Sgd { lr: 1e6 },
            steps: 50,
            ..config()
        };
        match train(&cfg, small_d(), small_g(), &data) {
            Err(Error::Diverged { step, last }) => {
                assert!(step > 0);
                assert_eq!(last.unwrap().step, step - 1);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let g = small_g();
        let bad_k = GameConfig {
            d_steps: 0,
            ..config()
        };
        assert!(bad_k.validate(&small_d(), &g).is_err());
        let mb = NetSpec {
            minibatch_features: Some(nets::MinibatchFeatureSpec { channels: 2, dim: 2 }),
            ..small_d()
        };
        let tiny = GameConfig {
            batch_size: 1,
            ..config()
        };
        assert!(tiny.validate(&mb, &g).is_err());
        assert!(tiny.validate(&small_d(), &g).is_ok());
        let unrolled = GameConfig {
            unroll_depth: 2,
            ..config()
        };
        assert!(unrolled.validate(&mb, &g).is_err());
        assert!(unrolled.validate(&small_d(), &g).is_ok());
    }

    #[test]
    fn feature_matching_examples() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap());
        let b = t.constant(Matrix::from_rows(&[vec![3.0, 0.0], vec![1.0, 2.0]]).unwrap());
        let c = t.constant(Matrix::from_rows(&[vec![3.0, 2.0], vec![1.0, 2.0]]).unwrap());
        let same = feature_match_loss(&mut t, a, b).unwrap();
        let unit = feature_match_loss(&mut t, a, c).unwrap();
        assert_eq!(t.scalar_value(same).unwrap(), 0.0);
        assert_eq!(t.scalar_value(unit).unwrap(), 1.0);
        let narrow = t.constant(Matrix::zeros(2, 1));
        assert!(feature_match_loss(&mut t, a, narrow).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: GameConfig = serde_json::from_str(
            r#"{"variant": "minimax", "batch_size": 32, "steps": 10, "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(cfg.d_steps, 1);
        assert_eq!(cfg.d_opt, default_adam());
        let back: GameConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn log_csv_header() {
        let mut buf = Vec::new();
        write_log_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,j_d,j_g,mean_d_data,mean_d_samples\n");
    }
}
