//! Plot data as `series,x,y` CSV. Consecutive rows of one series form a
//! polyline.

use std::fmt::Write as _;

use patchy::integrate::{solve_forward, vertex_trajectories, SolveError};
use patchy::rates::{example_1_4_paths, Example14};
use patchy::scenario::Scenario;
use patchy::{PatchyField, Point, SolverOpts};

pub const DEMO: &str = include_str!("../../patchy/scenarios/demo_generic.cfg");

/// Jump parameter of the plotted tangential solutions, large enough to see.
const PLOT_EPS: f64 = 0.1;
/// Leftward shift of the second curve in the displaced picture.
const SHIFT: f64 = 0.1;
const CURVE_SAMPLES: usize = 200;

struct Plot(String);

impl Plot {
    fn new() -> Self {
        Plot("series,x,y\n".into())
    }

    fn series(&mut self, name: &str, pts: impl IntoIterator<Item = Point>) {
        for p in pts {
            let _ = writeln!(self.0, "{name},{:.16e},{:.16e}", p.x, p.y);
        }
    }
}

fn grid(a: f64, b: f64) -> impl Iterator<Item = f64> {
    (0..=CURVE_SAMPLES).map(move |k| a + (b - a) * k as f64 / CURVE_SAMPLES as f64)
}

fn curves(plot: &mut Plot, s: &Example14, shift: f64) {
    plot.series("gamma1", grid(-1.0, 1.0).map(|x| Point::new(x, x.abs().powf(s.alpha))));
    plot.series("gamma2", grid(-0.2, 2.0).map(|y| Point::new((y - 1.0).abs().powf(s.beta) - shift, y)));
}

/// The tangential example: both curves and the solutions with and without
/// the jump for `eps = 0.1`.
pub fn tangential() -> String {
    let s = Example14::new(2.0, 2.0).expect("valid exponents");
    let paths = example_1_4_paths(&s, PLOT_EPS, 1e-3).expect("plot parameter is in range");
    let mut plot = Plot::new();
    curves(&mut plot, &s, 0.0);
    plot.series("unperturbed", paths.unperturbed.iter().map(|q| q.x));
    plot.series("perturbed", paths.perturbed.iter().map(|q| q.x));
    let lift = PLOT_EPS.powf(s.alpha);
    plot.series("point_a", [Point::new(0.0, 0.0)]);
    plot.series("point_b", [Point::new(0.0, 1.0)]);
    plot.series("point_p", [Point::new(PLOT_EPS, -lift)]);
    plot.series("point_p_prime", [Point::new(PLOT_EPS, lift)]);
    plot.0
}

/// The second curve moved left: the solution leaving the first tangency
/// crosses it transversally and never reaches the second tangency.
pub fn displaced() -> String {
    let s = Example14::new(2.0, 2.0).expect("valid exponents");
    let mut plot = Plot::new();
    curves(&mut plot, &s, SHIFT);
    let turn = 1.0 - SHIFT.powf(1.0 / s.beta);
    plot.series("solution", [Point::new(-1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, turn), Point::new(1.0, turn)]);
    plot.series("point_a", [Point::new(0.0, 0.0)]);
    plot.series("point_b_displaced", [Point::new(-SHIFT, 1.0)]);
    plot.0
}

/// Patch outlines, vertex trajectories of every region and the unperturbed
/// solution of the scenario.
pub fn polygonal(f: &PatchyField, s: &Scenario, opts: &SolverOpts) -> Result<String, SolveError> {
    let mut plot = Plot::new();
    for p in f.patches() {
        let v = p.domain.vertices();
        plot.series(&format!("patch_{}", p.id), v.iter().copied().chain(v.first().copied()));
    }
    for r in 0..f.len() {
        for (k, g) in vertex_trajectories(f, r, opts).iter().enumerate() {
            plot.series(&format!("vertex_path_{}_{k}", f.id(r)), g.path.samples.iter().map(|q| q.x));
        }
    }
    let x = solve_forward(f, s.run.x0, s.run.t0, s.run.t1, opts)?;
    plot.series("solution", x.pieces.iter().flat_map(|p| p.samples.iter().map(|q| q.x)));
    Ok(plot.0)
}
