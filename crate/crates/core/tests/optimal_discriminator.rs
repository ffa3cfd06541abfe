use std::f64::consts::LN_2;

use ganlab::analysis::{
    density_ratio_from_d, expected_d_cost_at_optimum, optimal_discriminator, ratio_estimate,
    train_frozen_discriminator, FrozenDConfig,
};
use ganlab::costs::{smoothed_optimal_d, smoothed_optimal_d_search, SmoothingParams};
use ganlab::distributions::{js_quadrature, Density, GaussianMixture, Grid1D};
use ganlab::ndcore::Matrix;
use proptest::prelude::*;

fn n(m: f64, v: f64) -> GaussianMixture {
    GaussianMixture::gaussian_1d(m, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // The pointwise optimum found by search matches both closed forms.
    #[test]
    fn search_matches_closed_forms(
        m1 in -3.0..3.0f64, v1 in 0.2..4.0f64,
        m2 in -3.0..3.0f64, v2 in 0.2..4.0f64,
        x in -3.0..3.0f64,
        alpha in 0.0..0.45f64, beta in 0.0..0.45f64,
    ) {
        let (p, q) = (n(m1, v1), n(m2, v2));
        let (pd, pm) = (p.density(&[x]).unwrap(), q.density(&[x]).unwrap());
        let plain = smoothed_optimal_d_search(pd, pm, SmoothingParams::NONE).unwrap();
        prop_assert!((plain - optimal_discriminator(&p, &q, &[x]).unwrap()).abs() < 1e-6);

        let s = SmoothingParams::new(alpha, beta).unwrap();
        let found = smoothed_optimal_d_search(pd, pm, s).unwrap();
        prop_assert!((found - smoothed_optimal_d(pd, pm, s).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn ratio_inverts_the_optimum(
        m1 in -2.0..2.0f64, v1 in 0.3..3.0f64,
        m2 in -2.0..2.0f64, v2 in 0.3..3.0f64,
        x in -2.0..2.0f64,
    ) {
        let (p, q) = (n(m1, v1), n(m2, v2));
        let r = density_ratio_from_d(optimal_discriminator(&p, &q, &[x]).unwrap()).unwrap();
        let exact = p.density(&[x]).unwrap() / q.density(&[x]).unwrap();
        // D/(1 − D) amplifies the rounding of 1 − D by about 1 + r.
        let tol = 1e-14 * (2.0 + exact + 1.0 / exact);
        prop_assert!((r / exact - 1.0).abs() < tol, "{} vs {}", r, exact);
    }
}

#[test]
fn optimum_cost_recovers_jensen_shannon() {
    let pairs = [
        (n(0.0, 1.0), n(1.0, 1.0)),
        (n(0.0, 1.0), n(0.0, 4.0)),
        (n(-1.0, 0.5), n(2.0, 2.0)),
        (n(0.0, 1.0), n(0.0, 1.0)),
        (
            GaussianMixture::equal_weights(&[vec![-2.0], vec![2.0]], 1.0).unwrap(),
            n(0.0, 5.0),
        ),
    ];
    for (p, q) in &pairs {
        let grid = Grid1D::covering(&[p, q]).unwrap();
        let cost = expected_d_cost_at_optimum(p, q, &grid).unwrap();
        let js = js_quadrature(p, q, &grid).unwrap();
        assert!((2.0 * LN_2 - 2.0 * cost - 2.0 * js).abs() < 1e-3);
    }
}

#[test]
fn frozen_generator_discriminator_approaches_the_optimum() {
    let (p, q) = (n(0.0, 1.0), n(1.0, 1.0));
    let d = train_frozen_discriminator(&p, &q, &FrozenDConfig::standard(1, 1)).unwrap();
    let xs: Vec<f64> = (0..=700).map(|i| -3.0 + 0.01 * i as f64).collect();
    let probs = d.probabilities(&Matrix::column(xs.clone())).unwrap();
    let mae = xs
        .iter()
        .zip(&probs)
        .map(|(x, d)| (d - optimal_discriminator(&p, &q, &[*x]).unwrap()).abs())
        .sum::<f64>()
        / xs.len() as f64;
    assert!(mae < 0.05, "mean |D − D*| = {mae}");

    let est = ratio_estimate(&d, &xs, Some((&p, &q))).unwrap();
    let worst = est.max_relative_error(&p, &q, 1e-3).unwrap().unwrap();
    assert!(worst < 0.15, "worst ratio error {worst}");
}
