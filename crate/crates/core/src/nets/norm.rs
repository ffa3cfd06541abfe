//! Normalisation layers and minibatch features, expressed as tape operations.

use crate::error::{Error, Result};
use crate::ndcore::{Tape, Var};

pub const NORM_EPS: f64 = 1e-5;

/// Per-feature batch normalisation (before scale and shift).
pub fn batch_norm(tape: &mut Tape, x: Var, eps: f64) -> Result<Var> {
    let mean = tape.mean_rows(x)?;
    let centered = tape.sub(x, mean)?;
    let sq = tape.square(centered)?;
    let var = tape.mean_rows(sq)?;
    let shifted = tape.offset(var, eps);
    let inv_std = tape.powf(shifted, -0.5);
    tape.mul(centered, inv_std)
}

/// Normalises `x` with statistics taken from `reference` only.
pub fn reference_norm(tape: &mut Tape, x: Var, reference: Var, eps: f64) -> Result<Var> {
    if tape.value(reference).rows() == 0 {
        return Err(Error::contract("reference_norm", "empty reference batch"));
    }
    let mean = tape.mean_rows(reference)?;
    let centered_ref = tape.sub(reference, mean)?;
    let sq = tape.square(centered_ref)?;
    let var = tape.mean_rows(sq)?;
    let shifted = tape.offset(var, eps);
    let inv_std = tape.powf(shifted, -0.5);
    let centered = tape.sub(x, mean)?;
    tape.mul(centered, inv_std)
}

/// Virtual batch normalisation without scale and shift: each row of `x` is
/// normalised by the mean and variance of itself together with every row of
/// `reference`, so rows of `x` never influence each other.
pub fn virtual_norm(tape: &mut Tape, x: Var, reference: Var, eps: f64) -> Result<Var> {
    let m = tape.value(reference).rows();
    if m == 0 {
        return Err(Error::contract("virtual_batch_norm", "empty reference batch"));
    }
    if tape.value(reference).cols() != tape.value(x).cols() {
        return Err(Error::contract(
            "virtual_batch_norm",
            "reference and batch feature widths differ",
        ));
    }
    let count = 1.0 / (m as f64 + 1.0);
    let s1 = tape.sum_rows(reference);
    let ref_sq = tape.square(reference)?;
    let s2 = tape.sum_rows(ref_sq);
    let sum = tape.add(x, s1)?;
    let mean = tape.scale(sum, count);
    let x_sq = tape.square(x)?;
    let sum_sq = tape.add(x_sq, s2)?;
    let second = tape.scale(sum_sq, count);
    let mean_sq = tape.square(mean)?;
    let var = tape.sub(second, mean_sq)?;
    let shifted = tape.offset(var, eps);
    let inv_std = tape.powf(shifted, -0.5);
    let centered = tape.sub(x, mean)?;
    tape.mul(centered, inv_std)
}

/// Virtual batch normalisation followed by `γ · x̂ + δ`.
pub fn virtual_batch_norm(
    tape: &mut Tape,
    features: Var,
    reference: Var,
    gamma: Var,
    delta: Var,
    eps: f64,
) -> Result<Var> {
    let normed = virtual_norm(tape, features, reference, eps)?;
    let scaled = tape.mul(normed, gamma)?;
    tape.add(scaled, delta)
}

/// Per-example closeness to the rest of the minibatch.
///
/// Features `f` (`n × k`) are projected by `projection` (`k × channels·dim`)
/// and each row gets, per channel, `Σ_j exp(−‖T f_i − T f_j‖₁)` over the
/// whole batch including itself. The result is `n × channels`.
pub fn minibatch_features(
    tape: &mut Tape,
    features: Var,
    projection: Var,
    channels: usize,
    dim: usize,
) -> Result<Var> {
    let codes = tape.matmul(features, projection)?;
    tape.minibatch_kernel(codes, channels, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::Matrix;

    fn vbn_values(x: Vec<f64>, reference: Vec<f64>) -> Vec<f64> {
        let mut t = Tape::new();
        let xv = t.constant(Matrix::column(x));
        let rv = t.constant(Matrix::column(reference));
        let g = t.constant(Matrix::scalar(1.0));
        let d = t.constant(Matrix::scalar(0.0));
        let out = virtual_batch_norm(&mut t, xv, rv, g, d, NORM_EPS).unwrap();
        t.value(out).as_slice().to_vec()
    }

    #[test]
    fn union_mean_centres_the_example() {
        assert!(vbn_values(vec![2.0], vec![1.0, 3.0])[0].abs() < 1e-12);
    }

    #[test]
    fn constant_union_gives_zero() {
        for c in [-7.5, 0.0, 1e3, 0.1] {
            let out = vbn_values(vec![c], vec![c; 5]);
            assert!(out[0].abs() < 1e-9, "{c}: {out:?}");
        }
    }

    #[test]
    fn examples_are_independent_of_each_other() {
        let reference = vec![0.3, -1.0, 2.2, 0.7];
        let a = vbn_values(vec![1.0, -4.0, 0.5], reference.clone());
        let b = vbn_values(vec![0.5, 1.0, -4.0], reference);
        assert_eq!(a[0], b[1]);
        assert_eq!(a[1], b[2]);
        assert_eq!(a[2], b[0]);
    }

    #[test]
    fn empty_reference_is_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::column(vec![1.0]));
        let r = t.constant(Matrix::zeros(0, 1));
        assert!(virtual_norm(&mut t, x, r, NORM_EPS).is_err());
    }

    #[test]
    fn batch_norm_standardises_each_feature() {
        let mut t = Tape::new();
        let x = t.constant(
            Matrix::from_vec(4, 2, vec![1.0, 10.0, 2.0, 20.0, 3.0, 35.0, 6.0, 5.0]).unwrap(),
        );
        let y = batch_norm(&mut t, x, 0.0).unwrap();
        let v = t.value(y);
        for c in 0..2 {
            let col: Vec<f64> = (0..4).map(|r| v.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    fn kernel(rows: Vec<Vec<f64>>) -> Vec<f64> {
        let mut t = Tape::new();
        let f = t.constant(Matrix::from_rows(&rows).unwrap());
        let k = rows[0].len();
        let mut eye = Matrix::zeros(k, k);
        for i in 0..k {
            eye.set(i, i, 1.0);
        }
        let proj = t.constant(eye);
        let o = minibatch_features(&mut t, f, proj, 1, k).unwrap();
        t.value(o).as_slice().to_vec()
    }

    #[test]
    fn minibatch_feature_limits() {
        assert_eq!(kernel(vec![vec![0.5, -1.0]; 4]), vec![4.0; 4]);
        assert_eq!(kernel(vec![vec![3.0, 2.0]]), vec![1.0]);
        let far = kernel(vec![vec![0.0, 0.0], vec![20.0, 20.0], vec![-20.0, 40.0]]);
        for o in far {
            assert!((o - 1.0).abs() <= 1e-15, "{o}");
        }
    }

    #[test]
    fn minibatch_features_reject_empty_batch() {
        let mut t = Tape::new();
        let f = t.constant(Matrix::zeros(0, 2));
        let p = t.constant(Matrix::zeros(2, 2));
        assert!(minibatch_features(&mut t, f, p, 1, 2).is_err());
    }
}
