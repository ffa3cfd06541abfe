//! Analytic oracles and diagnostics.

mod discriminator;
mod kl_fit;
mod mle;
mod modes;

pub use discriminator::{
    density_ratio_from_d, expected_d_cost_at_optimum, optimal_discriminator, optimal_logit,
    ratio_estimate, train_frozen_discriminator, FrozenDConfig, RatioEstimate, TrainedDiscriminator,
};
pub use kl_fit::{fit_gaussian_kl, fit_grid, GaussianFit, KlDirection, KlFitConfig};
pub use mle::{gradient_rel_error, mle_gradient_check, mle_gradient_monte_carlo, AffineFamily, MleGradientCheck};
pub use modes::{mode_coverage, ModeReport, DEFAULT_RADIUS_SIGMAS, DEFAULT_THRESHOLD_FRACTION};
