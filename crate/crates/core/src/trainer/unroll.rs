//! Unrolled generator gradients.
//!
//! The discriminator's own gradient is written out as tape operations
//! (hand-derived backpropagation through the MLP), so each SGD step
//! `θ_D ← θ_D − η ∇J^(D)` becomes part of the graph. The ordinary backward
//! pass then differentiates the generator loss through every step.

use super::{generator_gradient, GameConfig, Minibatch, TrainState};
use crate::costs::SmoothingParams;
use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Tape, Var};
use crate::nets::{Activation, NetSpec, NormMode};

pub(super) fn check_unrollable(spec: &NetSpec) -> Result<()> {
    if spec.norm != NormMode::None || spec.minibatch_features.is_some() || spec.condition_classes > 0
    {
        return Err(Error::contract(
            "unrolled_g_grad",
            "unrolling supports plain MLP discriminators only",
        ));
    }
    if spec.output_dim != 1 {
        return Err(Error::contract("unrolled_g_grad", "discriminator must emit one logit"));
    }
    Ok(())
}

/// Gradient of `J^(G)(θ_G, θ_D^K(θ_G))` for `depth ≥ 1` unrolled steps on
/// `batch`. The stored discriminator parameters are never modified.
pub fn unrolled_g_grad(
    state: &TrainState,
    config: &GameConfig,
    batch: &Minibatch,
    depth: usize,
) -> Result<Vec<f64>> {
    if depth == 0 {
        return Err(Error::contract(
            "unrolled_g_grad",
            "depth 0 is the ordinary generator gradient; use train_step",
        ));
    }
    check_unrollable(&state.d_spec)?;
    Ok(generator_gradient(state, config, batch, depth)?.1)
}

/// Applies `depth` SGD steps of the discriminator cost to `params`, all on
/// the tape. `x` holds data rows and `fake` generated rows; the same pair is
/// used for every step.
#[allow(clippy::too_many_arguments)]
pub(crate) fn unrolled_discriminator(
    tape: &mut Tape,
    spec: &NetSpec,
    mut params: Vec<Var>,
    x: Var,
    fake: Var,
    s: SmoothingParams,
    lr: f64,
    depth: usize,
) -> Result<Vec<Var>> {
    check_unrollable(spec)?;
    let n = tape.value(x).rows();
    let m = tape.value(fake).rows();
    if n == 0 || m == 0 {
        return Err(Error::contract("unrolled_g_grad", "empty minibatch"));
    }
    // dJ/da = w_i (σ(a_i) − t_i) with t the (smoothed) target and w the
    // ½/n or ½/m weight of each row.
    let mut target = vec![1.0 - s.alpha; n];
    target.extend(std::iter::repeat(s.beta).take(m));
    let mut weight = vec![0.5 / n as f64; n];
    weight.extend(std::iter::repeat(0.5 / m as f64).take(m));
    let target = tape.constant(Matrix::column(target));
    let weight = tape.constant(Matrix::column(weight));
    let input = tape.concat_rows(x, fake)?;
    let layers = spec.hidden.len();

    for _ in 0..depth {
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input);
        let mut h = input;
        for l in 0..layers {
            let xw = tape.matmul(h, params[2 * l])?;
            let pre = tape.add(xw, params[2 * l + 1])?;
            h = match spec.activation {
                Activation::Tanh => tape.tanh(pre),
                Activation::Relu => tape.relu(pre),
            };
            acts.push(h);
        }
        let (w_out, b_out) = (params[2 * layers], params[2 * layers + 1]);
        let xw = tape.matmul(h, w_out)?;
        let logits = tape.add(xw, b_out)?;

        let sig = tape.sigmoid(logits);
        let err = tape.sub(sig, target)?;
        let delta = tape.mul(err, weight)?;
        let mut grads = vec![None; params.len()];
        let ht = tape.transpose(h);
        grads[2 * layers] = Some(tape.matmul(ht, delta)?);
        grads[2 * layers + 1] = Some(tape.sum_rows(delta));
        let wt = tape.transpose(w_out);
        let mut back = tape.matmul(delta, wt)?;
        for l in (0..layers).rev() {
            let out = acts[l + 1];
            let slope = match spec.activation {
                Activation::Tanh => {
                    let sq = tape.square(out)?;
                    let neg = tape.neg(sq);
                    tape.offset(neg, 1.0)
                }
                Activation::Relu => tape.step(out),
            };
            let dpre = tape.mul(back, slope)?;
            let at = tape.transpose(acts[l]);
            grads[2 * l] = Some(tape.matmul(at, dpre)?);
            grads[2 * l + 1] = Some(tape.sum_rows(dpre));
            if l > 0 {
                let wt = tape.transpose(params[2 * l]);
                back = tape.matmul(dpre, wt)?;
            }
        }
        params = params
            .iter()
            .zip(grads)
            .map(|(&p, g)| {
                let step = tape.scale(g.expect("every slot filled"), lr);
                tape.sub(p, step)
            })
            .collect::<Result<_>>()?;
    }
    Ok(params)
}
