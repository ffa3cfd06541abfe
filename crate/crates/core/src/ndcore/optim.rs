use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(op: &'static str, params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract(
            op,
            format!("{} parameters but {} gradients", params.len(), grads.len()),
        ));
    }
    Ok(())
}

/// Plain gradient descent: `params ← params − lr · grads`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    check_lengths("sgd_step", params, grads)?;
    if !(lr > 0.0) {
        return Err(Error::contract("sgd_step", format!("learning rate {lr} must be > 0")));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.eps > 0.0
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::contract("adam", format!("invalid hyperparameters {self:?}")))
        }
    }
}

/// Moment buffers and step counter for bias-corrected Adam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        })
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    check_lengths("adam_step", params, grads)?;
    if state.m.len() != params.len() {
        return Err(Error::contract(
            "adam_step",
            format!("state holds {} moments for {} parameters", state.m.len(), params.len()),
        ));
    }
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    Adam(AdamConfig),
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match self {
            OptimizerConfig::Sgd { lr } => *lr,
            OptimizerConfig::Adam(c) => c.lr,
        }
    }
}

/// Optimizer with its running state, sized for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam(AdamState),
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, len: usize) -> Result<Self> {
        Ok(match config {
            OptimizerConfig::Sgd { lr } => {
                if lr < 0.0 {
                    return Err(Error::contract("sgd", format!("learning rate {lr} < 0")));
                }
                Optimizer::Sgd { lr }
            }
            OptimizerConfig::Adam(c) => Optimizer::Adam(AdamState::new(len, c)?),
        })
    }

    /// Applies one update. A zero learning rate leaves parameters untouched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Sgd { lr } if *lr == 0.0 => check_lengths("sgd_step", params, grads),
            Optimizer::Sgd { lr } => sgd_step(params, grads, *lr),
            Optimizer::Adam(state) => adam_step(params, grads, state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_examples() {
        let mut p = vec![1.0, 2.0];
        sgd_step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);

        let mut p = vec![1.0];
        sgd_step(&mut p, &[2.0], 0.1).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn sgd_steps_compose_linearly() {
        let g = [0.3, -1.7];
        let mut twice = vec![0.5, 0.25];
        sgd_step(&mut twice, &g, 0.05).unwrap();
        sgd_step(&mut twice, &g, 0.05).unwrap();
        let mut once = vec![0.5, 0.25];
        sgd_step(&mut once, &g, 0.1).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_rejects_shape_mismatch() {
        let mut p = vec![1.0];
        assert!(sgd_step(&mut p, &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn adam_zero_gradients_leave_params_unchanged() {
        let mut p = vec![0.5, -2.0, 3.0];
        let mut s = AdamState::new(3, AdamConfig::default()).unwrap();
        adam_step(&mut p, &[0.0; 3], &mut s).unwrap();
        assert_eq!(p, vec![0.5, -2.0, 3.0]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        // m̂ = v̂ = 1 after bias correction, so Δ = −lr / (1 + ε).
        let mut p = vec![0.0];
        let mut s = AdamState::new(1, AdamConfig::default()).unwrap();
        adam_step(&mut p, &[1.0], &mut s).unwrap();
        assert!((p[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn adam_is_elementwise() {
        let mut a = vec![1.0, -1.0];
        let mut sa = AdamState::new(2, AdamConfig::default()).unwrap();
        let mut b = vec![-1.0, 1.0];
        let mut sb = AdamState::new(2, AdamConfig::default()).unwrap();
        for _ in 0..5 {
            adam_step(&mut a, &[0.3, -2.0], &mut sa).unwrap();
            adam_step(&mut b, &[-2.0, 0.3], &mut sb).unwrap();
        }
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[0]);
    }

    #[test]
    fn adam_rejects_shape_mismatch_and_bad_betas() {
        let mut s = AdamState::new(2, AdamConfig::default()).unwrap();
        assert!(adam_step(&mut [0.0; 3], &[0.0; 3], &mut s).is_err());
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(1, bad).is_err());
    }
}
