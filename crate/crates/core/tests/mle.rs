use ganlab::analysis::{gradient_rel_error, mle_gradient_check, mle_gradient_monte_carlo, AffineFamily};
use ganlab::distributions::GaussianMixture;

#[test]
fn quadrature_routes_agree_on_affine_families() {
    let cases = [
        (AffineFamily::location(0.0).unwrap(), GaussianMixture::gaussian_1d(2.0, 1.0).unwrap()),
        (AffineFamily::new(1.0, 0.0).unwrap(), GaussianMixture::gaussian_1d(2.0, 1.0).unwrap()),
        (AffineFamily::new(0.5, 1.0).unwrap(), GaussianMixture::gaussian_1d(-1.0, 2.0).unwrap()),
        (AffineFamily::new(-2.0, 0.3).unwrap(), GaussianMixture::gaussian_1d(0.0, 1.0).unwrap()),
        (
            AffineFamily::new(1.5, 0.5).unwrap(),
            GaussianMixture::equal_weights(&[vec![-2.0], vec![2.0]], 1.0).unwrap(),
        ),
    ];
    for (fam, data) in &cases {
        let check = mle_gradient_check(*fam, data).unwrap();
        assert!(check.rel_error < 1e-3, "{fam:?}: {check:?}");
    }
}

#[test]
fn monte_carlo_matches_kl_gradient_for_fixed_seeds() {
    let fam = AffineFamily::location(0.0).unwrap();
    let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
    let kl = mle_gradient_check(fam, &data).unwrap().kl_grad;
    for seed in 1..=5 {
        let g = mle_gradient_monte_carlo(fam, &data, 100_000, seed).unwrap();
        let err = gradient_rel_error(&g, &kl);
        assert!(err < 0.05, "seed {seed}: {g:?} vs {kl:?} ({err})");
    }
}
