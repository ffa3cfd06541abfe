use std::f64::consts::TAU;

use ganlab::gamedyn::{closed_form_orbit, integrate_continuous, simultaneous_gd_discrete};
use proptest::prelude::*;

fn endpoint_error(steps: usize) -> f64 {
    let traj = integrate_continuous(1.0, 0.0, TAU, TAU / steps as f64).unwrap();
    let end = traj.last();
    (end.x - 1.0).hypot(end.y)
}

#[test]
fn rk4_is_fourth_order() {
    let factor = endpoint_error(32) / endpoint_error(64);
    assert!((12.0..=20.0).contains(&factor), "halving dt reduced the error by {factor}");
}

#[test]
fn rk4_tracks_the_orbit_over_a_period() {
    let traj = integrate_continuous(1.0, 0.0, TAU, 1e-3).unwrap();
    let worst = traj
        .points
        .iter()
        .map(|p| {
            let (x, y) = closed_form_orbit(1.0, 0.0, p.t);
            (p.x - x).hypot(p.y - y)
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
    assert!((traj.last().radius() - 1.0).abs() < 1e-6);
}

proptest! {
    #[test]
    fn orbit_is_a_group_action(
        x0 in -5.0..5.0f64, y0 in -5.0..5.0f64,
        t1 in -10.0..10.0f64, t2 in -10.0..10.0f64,
    ) {
        let (x1, y1) = closed_form_orbit(x0, y0, t1);
        let (a, b) = closed_form_orbit(x1, y1, t2);
        let (c, d) = closed_form_orbit(x0, y0, t1 + t2);
        prop_assert!((a - c).abs() < 1e-12 && (b - d).abs() < 1e-12);
    }

    #[test]
    fn discrete_radius_grows_by_one_plus_eta_squared(
        x0 in -3.0..3.0f64, y0 in -3.0..3.0f64, eta in 1e-3..1.0f64,
    ) {
        prop_assume!(x0.hypot(y0) > 1e-3);
        let traj = simultaneous_gd_discrete(x0, y0, eta, 60).unwrap();
        for w in traj.points.windows(2) {
            let ratio = w[1].radius().powi(2) / w[0].radius().powi(2);
            prop_assert!((ratio / (1.0 + eta * eta) - 1.0).abs() < 1e-12);
        }
    }
}
