use rayon::prelude::*;

use crate::field::PatchyField;
use crate::geometry::Point;
use crate::integrate::{solve_backward, solve_forward_grazing, sup_distance, SolverOpts, Trajectory};

/// Seed layout of the brute-force search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleGrid {
    /// Half side of the square of initial points around the perturbed start.
    pub radius: f64,
    /// Grid points per half side.
    pub n: usize,
    /// Also seed from backward solutions through every region vertex.
    pub vertex_seeds: bool,
}

impl Default for OracleGrid {
    fn default() -> Self {
        OracleGrid {
            radius: 0.05,
            n: 10,
            vertex_seeds: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub x: Trajectory,
    pub distance: f64,
    /// Number of seeds whose forward solution succeeded.
    pub seeds: usize,
    /// Grid spacing.
    pub resolution: f64,
}

/// Unperturbed solution closest to `y` in the sup norm among the forward
/// solutions from a grid of initial points and from points whose solution
/// passes through a region vertex. Independent of the shadowing pipeline.
pub fn nearest_solution_oracle(f: &PatchyField, y: &Trajectory, grid: &OracleGrid, opts: &SolverOpts) -> Option<OracleResult> {
    let (t0, t1) = (y.t0(), y.t1());
    let o = y.origin.x;
    let res = if grid.n == 0 { 0.0 } else { grid.radius / grid.n as f64 };
    let n = grid.n as i64;
    let mut seeds: Vec<(Point, Vec<Point>)> = Vec::new();
    for i in -n..=n {
        for j in -n..=n {
            let p = Point::new(o.x + i as f64 * res, o.y + j as f64 * res);
            if f.alpha_star(p).is_some() {
                seeds.push((p, Vec::new()));
            }
        }
    }
    seeds.push((y.start(), Vec::new()));
    if grid.vertex_seeds {
        for r in 0..f.len() {
            for &v in f.region(r).vertices() {
                let Some(tv) = closest_time(y, v) else {
                    continue;
                };
                if let Ok(back) = solve_backward(f, v, tv, t0, opts) {
                    seeds.push((back.start(), Vec::new()));
                    seeds.push((back.start(), vec![v]));
                }
            }
        }
    }
    let scored: Vec<(usize, f64, Trajectory)> = seeds
        .par_iter()
        .enumerate()
        .filter_map(|(k, (p, graze))| {
            let x = solve_forward_grazing(f, *p, t0, t1, opts, graze).ok()?;
            let d = sup_distance(&x, y, t0, t1);
            Some((k, d, x))
        })
        .collect();
    let count = scored.len();
    let (_, distance, x) = scored
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
    Some(OracleResult {
        x,
        distance,
        seeds: count,
        resolution: res,
    })
}

/// Time at which the sampled path comes closest to `p`.
fn closest_time(y: &Trajectory, p: Point) -> Option<f64> {
    y.pieces
        .iter()
        .flat_map(|q| q.samples.iter())
        .min_by(|a, b| a.x.dist(p).total_cmp(&b.x.dist(p)))
        .map(|s| s.t)
        .filter(|&t| t > y.t0())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{solve_forward, solve_perturbed};
    use crate::perturbation::BvPath;
    use crate::shadow::tests::generic_demo;

    #[test]
    fn unperturbed_path_is_found_exactly() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let y = solve_forward(&f, Point::new(0.2, 0.8), 0.0, 3.0, &opts).unwrap();
        let grid = OracleGrid {
            radius: 0.01,
            n: 2,
            vertex_seeds: false,
        };
        let r = nearest_solution_oracle(&f, &y, &grid, &opts).unwrap();
        assert!(r.distance < 1e-12);
        assert_eq!(r.seeds, 26);
        assert!((r.resolution - 0.005).abs() < 1e-15);
    }

    #[test]
    fn interior_jump_distance_is_bounded_by_the_jump() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let w = BvPath::single_jump(0.5, Point::new(0.0, 0.01));
        let y = solve_perturbed(&f, &w, Point::new(0.2, 0.8), 0.0, 3.0, &opts).unwrap();
        let r = nearest_solution_oracle(&f, &y, &OracleGrid::default(), &opts).unwrap();
        assert!(r.distance <= 0.01 + 1e-9, "{}", r.distance);
        assert!(r.distance > 1e-4);
    }
}
