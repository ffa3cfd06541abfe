//! The bilinear game `V(x, y) = x·y`: continuous orbits and discrete spirals.

use ganlab::gamedyn::{closed_form_orbit, integrate_continuous, simultaneous_gd_discrete, Trajectory};

use crate::error::{Context, Result};
use crate::svg::Plot;

fn phase_plot(title: &str, orbit: &Trajectory, spiral: &Trajectory, stride: usize) -> String {
    let mut plot = Plot::new(title).labels("x", "y").equal_aspect();
    plot.line("gradient flow (RK4)", orbit.points.iter().step_by(stride.max(1)).map(|p| (p.x, p.y)).collect());
    plot.line("simultaneous steps", spiral.points.iter().map(|p| (p.x, p.y)).collect());
    plot.dots("equilibrium", vec![(0.0, 0.0)], 3.0);
    plot.render()
}

pub mod orbit {
    use serde::{Deserialize, Serialize};

    use super::*;
    use crate::config::{self, ExperimentConfig};
    use crate::manifest::Check;
    use crate::output::Output;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub x0: f64,
        pub y0: f64,
        pub t_end: f64,
        pub dt: f64,
        /// Coarse step count for the order check; the fine run uses twice as many.
        pub order_steps: usize,
        /// Discrete steps drawn for comparison in the phase plot.
        pub eta: f64,
        pub spiral_steps: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                x0: 1.0,
                y0: 0.0,
                t_end: std::f64::consts::TAU,
                dt: 1e-3,
                order_steps: 32,
                eta: 0.1,
                spiral_steps: 60,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("xy-orbit", vec![1], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    fn endpoint_error(p: &Params, steps: usize) -> Result<f64> {
        let traj = integrate_continuous(p.x0, p.y0, p.t_end, p.t_end / steps as f64)
            .context(|| format!("RK4 with {steps} steps"))?;
        let end = traj.last();
        let (cx, cy) = closed_form_orbit(p.x0, p.y0, end.t);
        Ok((end.x - cx).hypot(end.y - cy))
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let traj = integrate_continuous(p.x0, p.y0, p.t_end, p.dt).context(|| "RK4 orbit".into())?;
        out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
        let spiral =
            simultaneous_gd_discrete(p.x0, p.y0, p.eta, p.spiral_steps).context(|| "discrete steps".into())?;
        let stride = traj.points.len() / 400;
        out.text("phase.svg", &phase_plot("x·y game: orbit vs discrete spiral", &traj, &spiral, stride))?;

        let r0 = p.x0.hypot(p.y0);
        let mut max_err = 0.0f64;
        for s in &traj.points {
            let (cx, cy) = closed_form_orbit(p.x0, p.y0, s.t);
            max_err = max_err.max((s.x - cx).hypot(s.y - cy));
        }
        let drift = (traj.last().radius() - r0).abs();
        let factor = endpoint_error(&p, p.order_steps)? / endpoint_error(&p, 2 * p.order_steps)?;
        Ok(vec![
            Check::below("max_error_vs_closed_form", max_err, 1e-4),
            Check::below("radius_drift", drift, 1e-6),
            Check::within("rk4_order_factor", factor, 12.0, 20.0),
        ])
    }
}

pub mod spiral {
    use serde::{Deserialize, Serialize};

    use super::*;
    use crate::config::{self, ExperimentConfig};
    use crate::manifest::Check;
    use crate::output::Output;

    #[derive(Clone, Debug, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Params {
        pub x0: f64,
        pub y0: f64,
        pub eta: f64,
        pub steps: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                x0: 1.0,
                y0: 0.0,
                eta: 0.1,
                steps: 100,
            }
        }
    }

    pub fn defaults() -> ExperimentConfig {
        crate::experiments::base("xy-discrete-spiral", vec![1], &Params::default())
    }

    pub fn check_params(cfg: &ExperimentConfig) -> Result<()> {
        config::check_params::<Params>(cfg)
    }

    pub fn run(cfg: &ExperimentConfig, out: &mut Output) -> Result<Vec<Check>> {
        let p: Params = cfg.params()?;
        let traj = simultaneous_gd_discrete(p.x0, p.y0, p.eta, p.steps).context(|| "discrete steps".into())?;
        out.write_with("trajectory.csv", |w| traj.write_csv(w))?;
        let r0 = p.x0.hypot(p.y0);
        let t_end = p.eta * traj.points.len().saturating_sub(1) as f64;
        let orbit = integrate_continuous(p.x0, p.y0, t_end, 1e-3).context(|| "RK4 orbit".into())?;
        let stride = orbit.points.len() / 400;
        out.text("phase.svg", &phase_plot("x·y game: discrete spiral", &orbit, &traj, stride))?;

        let growth = 1.0 + p.eta * p.eta;
        let mut worst = 0.0f64;
        for w in traj.points.windows(2) {
            let (a, b) = (w[0].radius().powi(2), w[1].radius().powi(2));
            if a > 0.0 {
                worst = worst.max((b / (growth * a) - 1.0).abs());
            }
        }
        let mut checks = vec![Check::below("max_radius_growth_error", worst, 1e-12)];
        let steps_done = traj.points.len() - 1;
        checks.push(Check::at_least("steps_before_overflow", steps_done as f64, p.steps as f64));
        checks.push(Check::above("final_radius_ratio", traj.last().radius() / r0, 1.0));
        Ok(checks)
    }
}
