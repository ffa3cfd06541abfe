//! Semi-supervised training with an `n + 1`-class discriminator.
//!
//! Output column `n` is the "fake" class. Summing the softmax over the first
//! `n` columns gives the probability that an input is real, which in logit
//! form is `log Σ_{c<n} exp(l_c) − l_n`. That logit feeds the ordinary
//! discriminator cost, so unlabeled data trains the classifier too.

use super::{feature_match_loss, mean_sigmoid, LogRow, TrainState};
use crate::costs;
use crate::error::{Error, Result};
use crate::ndcore::{sigmoid, Matrix, Tape, Var};
use crate::nets::append_one_hot;

use super::GameConfig;

/// Logit of "real" from `n + 1` class logits (one row per example).
pub fn ssl_real_logit(tape: &mut Tape, logits: Var, n: usize) -> Result<Var> {
    check_width(tape.value(logits).cols(), n)?;
    let real = tape.slice_cols(logits, 0, n)?;
    let fake = tape.slice_cols(logits, n, n + 1)?;
    let lse = tape.logsumexp_cols(real)?;
    tape.sub(lse, fake)
}

/// Probability mass on the `n` real classes of a softmax over `n + 1` logits.
pub fn ssl_real_probability(logits: &[f64]) -> Result<f64> {
    if logits.len() < 2 {
        return Err(Error::contract("ssl_real_probability", "need at least n + 1 = 2 logits"));
    }
    let (real, fake) = logits.split_at(logits.len() - 1);
    let max = real.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + real.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    Ok(sigmoid(lse - fake[0]))
}

/// Mean cross-entropy of the true class under a softmax over all `n + 1` logits.
pub fn ssl_supervised_loss(tape: &mut Tape, logits: Var, labels: &[usize], n: usize) -> Result<Var> {
    let rows = tape.value(logits).rows();
    check_width(tape.value(logits).cols(), n)?;
    if labels.len() != rows || rows == 0 {
        return Err(Error::contract(
            "ssl_supervised_loss",
            format!("{} labels for {rows} rows", labels.len()),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&l| l >= n) {
        return Err(Error::contract(
            "ssl_supervised_loss",
            format!("label {bad} is not one of the {n} real classes"),
        ));
    }
    let one_hot = append_one_hot(&Matrix::zeros(rows, 0), labels, n + 1)?;
    let one_hot = tape.constant(one_hot);
    let masked = tape.mul(logits, one_hot)?;
    let picked = tape.sum_cols(masked);
    let lse = tape.logsumexp_cols(logits)?;
    let nll = tape.sub(lse, picked)?;
    tape.mean(nll)
}

fn check_width(cols: usize, n: usize) -> Result<()> {
    if n == 0 || cols != n + 1 {
        return Err(Error::contract(
            "ssl",
            format!("discriminator emits {cols} logits, expected n + 1 = {}", n + 1),
        ));
    }
    Ok(())
}

/// One semi-supervised step's inputs. Either part may have zero rows.
#[derive(Clone, Copy, Debug)]
pub struct SslBatch<'a> {
    pub labeled: &'a Matrix,
    pub labels: &'a [usize],
    pub unlabeled: &'a Matrix,
    pub z: &'a Matrix,
}

/// Discriminator update on supervised cross-entropy plus the real/fake cost
/// of the summed-class logit, and a feature-matching generator update. Both
/// gradients are taken before either player moves. Without unlabeled rows
/// only the supervised term remains and the generator is left alone.
pub fn ssl_train_step(
    state: &mut TrainState,
    config: &GameConfig,
    batch: &SslBatch<'_>,
    n_classes: usize,
) -> Result<()> {
    check_width(state.d_spec.output_dim, n_classes)?;
    let has_labeled = batch.labeled.rows() > 0;
    let has_unlabeled = batch.unlabeled.rows() > 0;
    if !has_labeled && !has_unlabeled {
        return Err(Error::contract("ssl_train_step", "empty batch"));
    }

    let mut tape = Tape::new();
    let d = state.d_params.bind(&mut tape);
    let g = state.g_params.bind_constant(&mut tape);
    let mut loss = None;
    let mut logits = Vec::new();
    if has_labeled {
        let x = tape.constant(batch.labeled.clone());
        let out = state.discriminate_on(&mut tape, &d, x)?.output;
        loss = Some(ssl_supervised_loss(&mut tape, out, batch.labels, n_classes)?);
        logits.push(out);
    }
    let (mut mean_data, mut mean_fake) = (0.0, 0.0);
    if has_unlabeled {
        let x = tape.constant(batch.unlabeled.clone());
        let z = tape.constant(batch.z.clone());
        let fake = state.generate_on(&mut tape, &g, z)?;
        let on_data = state.discriminate_on(&mut tape, &d, x)?.output;
        let on_fake = state.discriminate_on(&mut tape, &d, fake)?.output;
        let a_data = ssl_real_logit(&mut tape, on_data, n_classes)?;
        let a_fake = ssl_real_logit(&mut tape, on_fake, n_classes)?;
        let gan = costs::d_cost(&mut tape, a_data, a_fake, config.smoothing)?;
        loss = Some(match loss {
            Some(l) => tape.add(l, gan)?,
            None => gan,
        });
        mean_data = mean_sigmoid(&tape, a_data);
        mean_fake = mean_sigmoid(&tape, a_fake);
        logits.extend([on_data, on_fake]);
    }
    let loss = loss.expect("at least one term");
    let j_d = state.guard(&tape, loss, &logits)?;
    let d_grad = state.d_params.flat_grad(&state.backward(&tape, loss)?, &d)?;

    let mut j_g = 0.0;
    let g_grad = if has_unlabeled {
        let mut tape = Tape::new();
        let g = state.g_params.bind(&mut tape);
        let d = state.d_params.bind_constant(&mut tape);
        let x = tape.constant(batch.unlabeled.clone());
        let z = tape.constant(batch.z.clone());
        let fake = state.generate_on(&mut tape, &g, z)?;
        let on_data = state.discriminate_on(&mut tape, &d, x)?;
        let on_fake = state.discriminate_on(&mut tape, &d, fake)?;
        let fm = feature_match_loss(&mut tape, on_data.features, on_fake.features)?;
        j_g = state.guard(&tape, fm, &[on_data.output, on_fake.output])?;
        Some(state.g_params.flat_grad(&state.backward(&tape, fm)?, &g)?)
    } else {
        None
    };

    state.d_opt.step(&mut state.d_params.theta, &d_grad)?;
    if let Some(gg) = g_grad {
        state.g_opt.step(&mut state.g_params.theta, &gg)?;
    }
    state.log.push(LogRow {
        step: state.step,
        j_d,
        j_g,
        mean_d_data: mean_data,
        mean_d_samples: mean_fake,
    });
    state.step += 1;
    Ok(())
}

/// Most likely real class for each row of `x`.
pub fn ssl_predict(state: &TrainState, x: &Matrix) -> Result<Vec<usize>> {
    let n = state.d_spec.output_dim.saturating_sub(1);
    check_width(state.d_spec.output_dim, n)?;
    let mut tape = Tape::new();
    let d = state.d_params.bind_constant(&mut tape);
    let xv = tape.constant(x.clone());
    let out = state.discriminate_on(&mut tape, &d, xv)?.output;
    let logits = tape.value(out);
    Ok((0..logits.rows())
        .map(|r| {
            let row = &logits.row_slice(r)[..n];
            (0..n).fold(0, |best, c| if row[c] > row[best] { c } else { best })
        })
        .collect())
}

/// Fraction of rows of `x` whose predicted class equals `labels`.
pub fn ssl_accuracy(state: &TrainState, x: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.rows() || labels.is_empty() {
        return Err(Error::contract("ssl_accuracy", "one label per row is required"));
    }
    let pred = ssl_predict(state, x)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}
