use ganlab::costs::GameVariant;
use ganlab::distributions::GaussianMixture;
use ganlab::ndcore::{AdamConfig, OptimizerConfig};
use ganlab::nets::{GeneratorSpec, NetSpec};
use ganlab::trainer::{train, GameConfig};

fn adam(lr: f64) -> OptimizerConfig {
    OptimizerConfig::Adam(AdamConfig {
        lr,
        beta1: 0.5,
        beta2: 0.999,
        eps: 1e-8,
    })
}

#[test]
fn location_generator_finds_the_data_mean() {
    let data = GaussianMixture::gaussian_1d(2.0, 1.0).unwrap();
    let config = GameConfig {
        variant: GameVariant::NonSaturating,
        g_opt: adam(1e-2),
        steps: 2000,
        seed: 1,
        ..GameConfig::default()
    };
    let (state, _) = train(
        &config,
        NetSpec::default_discriminator(1),
        GeneratorSpec::Location { dim: 1 },
        &data,
    )
    .unwrap();
    let theta = state.g_params.theta[0];
    assert!((theta - 2.0).abs() < 0.1, "θ = {theta}");
}

#[test]
fn matched_distributions_leave_the_discriminator_undecided() {
    // The location generator starts at shift 0, so p_model = p_data.
    let data = GaussianMixture::gaussian_1d(0.0, 1.0).unwrap();
    let config = GameConfig {
        variant: GameVariant::Minimax,
        steps: 1500,
        seed: 3,
        ..GameConfig::default()
    };
    let (state, _) = train(
        &config,
        NetSpec::default_discriminator(1),
        GeneratorSpec::Location { dim: 1 },
        &data,
    )
    .unwrap();
    let tail = &state.log[state.log.len() - 500..];
    let mean = |f: fn(&ganlab::trainer::LogRow) -> f64| tail.iter().map(f).sum::<f64>() / tail.len() as f64;
    let (on_data, on_samples) = (mean(|r| r.mean_d_data), mean(|r| r.mean_d_samples));
    assert!((on_data - 0.5).abs() < 0.05, "{on_data}");
    assert!((on_data - (1.0 - on_samples)).abs() < 0.05, "{on_data} vs {on_samples}");
}
