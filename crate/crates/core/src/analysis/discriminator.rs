use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::costs::{self, SmoothingParams};
use crate::distributions::{fmt_f64, rng_from_seed, Density, Quadrature, Sampler};
use crate::error::{Error, Result};
use crate::ndcore::{sigmoid, softplus, AdamConfig, AdamState, Matrix, Tape};
use crate::nets::{self, BatchContext, NetParams, NetSpec};

/// `log p_data(x) − log p_model(x)`, the logit of the optimal discriminator.
pub fn optimal_logit(p_data: &dyn Density, p_model: &dyn Density, x: &[f64]) -> Result<f64> {
    let lp = p_data.log_density(x)?;
    let lq = p_model.log_density(x)?;
    if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
        return Err(Error::UndefinedPoint);
    }
    Ok(lp - lq)
}

/// `D*(x) = p_data(x) / (p_data(x) + p_model(x))`, evaluated as `σ(log p_data − log p_model)`.
pub fn optimal_discriminator(p_data: &dyn Density, p_model: &dyn Density, x: &[f64]) -> Result<f64> {
    optimal_logit(p_data, p_model, x).map(sigmoid)
}

/// The density ratio `D / (1 − D)` implied by a discriminator output.
pub fn density_ratio_from_d(d: f64) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InfiniteRatio { d });
    }
    Ok(d / (1.0 - d))
}

/// `E_data[−½ log D*] + E_model[−½ log(1 − D*)]`, the unsmoothed discriminator
/// cost at the optimum, by quadrature. Equals `ln 2 − JS(p_data, p_model)`.
pub fn expected_d_cost_at_optimum(
    p_data: &dyn Density,
    p_model: &dyn Density,
    grid: &dyn Quadrature,
) -> Result<f64> {
    let mut total = 0.0;
    grid.for_each(&mut |x, w| {
        let lp = p_data.log_density(x)?;
        let lq = p_model.log_density(x)?;
        if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
            return Ok(());
        }
        let a = lp - lq;
        if lp > f64::NEG_INFINITY {
            total += w * 0.5 * lp.exp() * softplus(-a);
        }
        if lq > f64::NEG_INFINITY {
            total += w * 0.5 * lq.exp() * softplus(a);
        }
        Ok(())
    })?;
    Ok(total)
}

/// Training setup for a discriminator facing a fixed generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenDConfig {
    pub spec: NetSpec,
    pub steps: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// When set, the learning rate falls linearly from `adam.lr` to this
    /// value over the run.
    #[serde(default)]
    pub final_lr: Option<f64>,
    pub seed: u64,
}

impl FrozenDConfig {
    /// 64-unit two-layer relu network, Adam at 1e-3 annealed linearly to 0,
    /// 5000 steps of 256. Without the anneal, minibatch noise in the last
    /// steps leaves the tails of the implied ratio off by up to ~25%.
    pub fn standard(x_dim: usize, seed: u64) -> Self {
        FrozenDConfig {
            spec: NetSpec::default_discriminator(x_dim),
            steps: 5000,
            batch_size: 256,
            adam: AdamConfig::default(),
            final_lr: Some(0.0),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedDiscriminator {
    pub spec: NetSpec,
    pub params: NetParams,
}

impl TrainedDiscriminator {
    pub fn logits(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let d = self.params.bind_constant(&mut tape);
        let xv = tape.constant(x.clone());
        let ctx = BatchContext::for_params(&self.spec, &self.params)?;
        let out = nets::discriminator_forward(&mut tape, &self.spec, &d, xv, &ctx)?.output;
        Ok(tape.value(out).as_slice().to_vec())
    }

    pub fn probabilities(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.into_iter().map(sigmoid).collect())
    }
}

/// Fits a discriminator by minimising the standard discriminator cost
/// against samples of a fixed `p_model`.
pub fn train_frozen_discriminator(
    p_data: &dyn Sampler,
    p_model: &dyn Sampler,
    config: &FrozenDConfig,
) -> Result<TrainedDiscriminator> {
    if config.spec.norm != nets::NormMode::None || config.spec.output_dim != 1 {
        return Err(Error::contract(
            "train_frozen_discriminator",
            "expects an unnormalised single-logit discriminator",
        ));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut params = config.spec.init(&mut rng)?;
    let mut adam = AdamState::new(params.len(), config.adam)?;
    let ctx = BatchContext::plain();
    for step in 0..config.steps {
        if let Some(end) = config.final_lr {
            let frac = step as f64 / config.steps.max(1) as f64;
            adam.config.lr = config.adam.lr + (end - config.adam.lr) * frac;
        }
        let xd = p_data.sample(&mut rng, config.batch_size)?;
        let xm = p_model.sample(&mut rng, config.batch_size)?;
        let mut tape = Tape::new();
        let d = params.bind(&mut tape);
        let a = tape.constant(xd.samples().clone());
        let b = tape.constant(xm.samples().clone());
        let on_data = nets::discriminator_forward(&mut tape, &config.spec, &d, a, &ctx)?.output;
        let on_model = nets::discriminator_forward(&mut tape, &config.spec, &d, b, &ctx)?.output;
        let loss = costs::d_cost(&mut tape, on_data, on_model, SmoothingParams::NONE)?;
        if !tape.scalar_value(loss)?.is_finite() {
            return Err(Error::Diverged { step, last: None });
        }
        let grads = tape.backward(loss)?;
        let flat = params.flat_grad(&grads, &d)?;
        crate::ndcore::adam_step(&mut params.theta, &flat, &mut adam)?;
    }
    Ok(TrainedDiscriminator {
        spec: config.spec.clone(),
        params,
    })
}

/// A discriminator's implied density ratio on a 1-D grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    pub implied: Vec<f64>,
    pub analytic: Option<Vec<f64>>,
}

/// Evaluates `d` on `points` and converts each output to a ratio. With
/// `truth`, also records the exact `p_data / p_model`.
pub fn ratio_estimate(
    d: &TrainedDiscriminator,
    points: &[f64],
    truth: Option<(&dyn Density, &dyn Density)>,
) -> Result<RatioEstimate> {
    let probs = d.probabilities(&Matrix::column(points.to_vec()))?;
    let implied = probs.iter().map(|&p| density_ratio_from_d(p)).collect::<Result<Vec<_>>>()?;
    let analytic = truth
        .map(|(p, q)| {
            points
                .iter()
                .map(|&x| Ok((p.log_density(&[x])? - q.log_density(&[x])?).exp()))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(RatioEstimate {
        x: points.to_vec(),
        d: probs,
        implied,
        analytic,
    })
}

impl RatioEstimate {
    /// Largest `|implied / analytic − 1|` over points where both densities
    /// exceed `floor`. `None` without analytic values or qualifying points.
    pub fn max_relative_error(
        &self,
        p_data: &dyn Density,
        p_model: &dyn Density,
        floor: f64,
    ) -> Result<Option<f64>> {
        let Some(analytic) = &self.analytic else {
            return Ok(None);
        };
        let mut worst: Option<f64> = None;
        for ((x, est), truth) in self.x.iter().zip(&self.implied).zip(analytic) {
            if p_data.density(&[*x])? > floor && p_model.density(&[*x])? > floor {
                let e = (est / truth - 1.0).abs();
                worst = Some(worst.map_or(e, |w| w.max(e)));
            }
        }
        Ok(worst)
    }

    /// Writes `x,d,implied_ratio,analytic_ratio`; the last column is empty
    /// when no analytic ratio is known.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "d", "implied_ratio", "analytic_ratio"])?;
        for i in 0..self.x.len() {
            let analytic = self.analytic.as_ref().map_or(String::new(), |a| fmt_f64(a[i]));
            w.write_record([fmt_f64(self.x[i]), fmt_f64(self.d[i]), fmt_f64(self.implied[i]), analytic])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{js_quadrature, GaussianMixture, Grid1D};

    fn n(m: f64) -> GaussianMixture {
        GaussianMixture::gaussian_1d(m, 1.0).unwrap()
    }

    #[test]
    fn optimal_discriminator_examples() {
        let (p, q) = (n(0.0), n(1.0));
        assert_eq!(optimal_discriminator(&p, &p, &[0.3]).unwrap(), 0.5);
        assert!((optimal_discriminator(&p, &q, &[0.5]).unwrap() - 0.5).abs() < 1e-15);
        let d0 = optimal_discriminator(&p, &q, &[0.0]).unwrap();
        assert!((d0 - 0.62246).abs() < 1e-5);
        assert!((d0 - 0.5f64.exp() / (1.0 + 0.5f64.exp())).abs() < 1e-15);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(density_ratio_from_d(0.5).unwrap(), 1.0);
        assert!((density_ratio_from_d(0.8).unwrap() - 4.0).abs() < 1e-12);
        let d = sigmoid(0.5);
        assert!((density_ratio_from_d(d).unwrap() - 0.5f64.exp()).abs() < 1e-12);
        assert!((density_ratio_from_d(0.62246).unwrap() - 1.64872).abs() < 1e-4);
        assert!(matches!(density_ratio_from_d(1.0), Err(Error::InfiniteRatio { .. })));
        assert!(matches!(density_ratio_from_d(0.0), Err(Error::InfiniteRatio { .. })));
    }

    #[test]
    fn vanishing_densities_are_undefined() {
        let p = crate::distributions::Pushforward1D::new(n(0.0), crate::distributions::MonotoneMap::Logistic)
            .unwrap();
        assert!(matches!(optimal_discriminator(&p, &p, &[3.0]), Err(Error::UndefinedPoint)));
    }

    #[test]
    fn optimum_cost_is_ln2_minus_js() {
        let (p, q) = (n(0.0), GaussianMixture::gaussian_1d(1.5, 0.5).unwrap());
        let grid = Grid1D::covering(&[&p, &q]).unwrap();
        let c = expected_d_cost_at_optimum(&p, &q, &grid).unwrap();
        let js = js_quadrature(&p, &q, &grid).unwrap();
        assert!((c - (std::f64::consts::LN_2 - js)).abs() < 1e-10);
    }

    #[test]
    fn ratio_csv_has_blank_analytic_column_without_truth() {
        let spec = NetSpec::default_discriminator(1);
        let d = TrainedDiscriminator {
            params: spec.init(&mut rng_from_seed(0)).unwrap(),
            spec,
        };
        let est = ratio_estimate(&d, &[0.0, 1.0], None).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("x,d,implied_ratio,analytic_ratio\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }
}
