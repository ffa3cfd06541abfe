use ganlab::costs::{self, GameVariant, SmoothingParams};
use ganlab::distributions::{fill_standard_normal, rng_from_seed};
use ganlab::ndcore::gradcheck::{check_gradients, RandomGraph, FD_STEP};
use ganlab::ndcore::{Matrix, Tape, Var};
use ganlab::nets::{self, Activation, BatchContext, MinibatchFeatureSpec, NetSpec, NormMode};

const TOL: f64 = 1e-4;

fn slots(spec: &NetSpec, seed: u64) -> Vec<Matrix> {
    let params = spec.init(&mut rng_from_seed(seed)).unwrap();
    params
        .registry()
        .iter()
        .map(|s| Matrix::from_vec(s.rows, s.cols, params.slot(&s.name).unwrap().to_vec()).unwrap())
        .collect()
}

fn normal(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut v = vec![0.0; rows * cols];
    fill_standard_normal(&mut rng_from_seed(seed), &mut v);
    Matrix::from_vec(rows, cols, v).unwrap()
}

#[test]
fn hundred_random_composed_graphs() {
    let mut rng = rng_from_seed(2024);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let g = RandomGraph::generate(&mut rng).unwrap();
        let err = g.check(FD_STEP).unwrap();
        assert!(err < TOL, "graph {i} ({} ops): relative error {err}", g.len());
        worst = worst.max(err);
    }
    println!("worst relative error over 100 graphs: {worst:e}");
}

#[test]
fn three_layer_mlp_loss() {
    let spec = NetSpec {
        hidden: vec![6, 5],
        activation: Activation::Tanh,
        ..NetSpec::default_discriminator(3)
    };
    let x = normal(7, 3, 1);
    let err = check_gradients(&slots(&spec, 2), FD_STEP, |t, p| {
        let xv = t.constant(x.clone());
        let out = nets::discriminator_forward(t, &spec, p, xv, &BatchContext::plain())?.output;
        let sq = t.square(out)?;
        t.mean(sq)
    })
    .unwrap();
    assert!(err < TOL, "{err}");
}

/// Generator and discriminator parameters together, through the
/// non-saturating generator cost of `D(G(z))` plus the discriminator cost.
fn game_loss(
    t: &mut Tape,
    p: &[Var],
    g_spec: &NetSpec,
    d_spec: &NetSpec,
    z: &Matrix,
    x: &Matrix,
) -> ganlab::error::Result<Var> {
    let n_g = g_spec.registry().len();
    let (gp, dp) = p.split_at(n_g);
    let zv = t.constant(z.clone());
    let xv = t.constant(x.clone());
    let fake = nets::generator_forward(t, g_spec, gp, zv, &BatchContext::batch())?;
    let on_fake = nets::discriminator_forward(t, d_spec, dp, fake, &BatchContext::plain())?.output;
    let on_data = nets::discriminator_forward(t, d_spec, dp, xv, &BatchContext::plain())?.output;
    let jg = costs::g_cost(t, GameVariant::NonSaturating, on_fake)?;
    let jd = costs::d_cost(t, on_data, on_fake, SmoothingParams::one_sided(0.1)?)?;
    t.add(jg, jd)
}

#[test]
fn discriminator_of_generator() {
    let g_spec = NetSpec {
        hidden: vec![5, 4],
        norm: NormMode::Batch,
        ..NetSpec::default_generator(2, 2)
    };
    let d_spec = NetSpec {
        hidden: vec![5],
        activation: Activation::Tanh,
        minibatch_features: Some(MinibatchFeatureSpec { channels: 3, dim: 2 }),
        ..NetSpec::default_discriminator(2)
    };
    let (z, x) = (normal(6, 2, 3), normal(6, 2, 4));
    let mut inputs = slots(&g_spec, 5);
    inputs.extend(slots(&d_spec, 6));
    let err = check_gradients(&inputs, FD_STEP, |t, p| game_loss(t, p, &g_spec, &d_spec, &z, &x)).unwrap();
    assert!(err < TOL, "{err}");
}
