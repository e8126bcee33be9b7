use super::capped;
use crate::field::PatchyField;
use crate::geometry::{bbox, Point, Segment};
use crate::integrate::{exit_time, flow, Direction, Piece, SolverOpts, VertexTrajectory, DEGENERATE_LEN};

/// Width-`lambda` neighbourhood of a vertex trajectory, bounded by the flow
/// lines ("rails") started at the edge windows around each crossing.
#[derive(Clone, Debug)]
pub struct Tube {
    pub region: usize,
    pub gamma: VertexTrajectory,
    pub lambda: f64,
    /// Edge windows around every crossing but the last.
    pub gates: Vec<Segment>,
    /// Flow lines from the window endpoints, on the trajectory's clock.
    pub rails: Vec<Piece>,
    /// Box enclosing every point the tube can contain.
    bounds: (Point, Point),
}

impl Tube {
    pub fn new(f: &PatchyField, gamma: &VertexTrajectory, lambda: f64, opts: &SolverOpts) -> Tube {
        let region = gamma.region;
        let d = f.region(region);
        let mut tube = Tube {
            region,
            gamma: gamma.clone(),
            lambda,
            gates: Vec::new(),
            rails: Vec::new(),
            bounds: (Point::ZERO, Point::ZERO),
        };
        let n = gamma.crossings.len();
        let search = capped(opts, gamma.t_end() - gamma.t_start() + 1.0);
        for &th in &gamma.crossings[..n.saturating_sub(1)] {
            let c = gamma.path.eval(th);
            let r = lambda + tube.width(th);
            for e in d.edges() {
                let Some(window) = clip_to_ball(&e.seg, c, r) else {
                    continue;
                };
                tube.gates.push(window);
                for p in [window.a, window.b] {
                    // endpoints on the trajectory itself only retrace it
                    if gamma.closest(p).1 < 0.5 * lambda {
                        continue;
                    }
                    let Ok(t_exit) = exit_time(f, region, p, Direction::Forward, &search) else {
                        continue;
                    };
                    if t_exit * f.eval_in(region, p).norm() <= DEGENERATE_LEN {
                        continue;
                    }
                    tube.rails.push(flow(f, region, p, th, t_exit, opts));
                }
            }
        }
        let mut pts = tube.outline();
        pts.extend(gamma.path.samples.iter().map(|s| s.x));
        let (lo, hi) = bbox(&pts);
        let pad = Point::new(lambda + 1e-9, lambda + 1e-9);
        tube.bounds = (lo - pad, hi + pad);
        tube
    }

    /// Half-width of the tube at time `t` of the trajectory's clock.
    pub fn width(&self, t: f64) -> f64 {
        let g = self.gamma.path.eval(t);
        self.rails
            .iter()
            .filter(|r| r.t0() <= t && t <= r.t1())
            .map(|r| r.eval(t).dist(g))
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, f: &PatchyField, p: Point) -> bool {
        let (lo, hi) = self.bounds;
        if p.x < lo.x || p.y < lo.y || p.x > hi.x || p.y > hi.y || !f.in_region_closure(self.region, p) {
            return false;
        }
        let (t, d) = self.gamma.closest(p);
        d <= self.width(t).max(self.lambda_at_gate(p)) + 1e-12
    }

    /// Points of a gate window count as inside even before a rail starts.
    fn lambda_at_gate(&self, p: Point) -> f64 {
        if self.gates.iter().any(|g| g.dist_to(p) <= 1e-9) {
            self.lambda
        } else {
            0.0
        }
    }

    /// Samples `n` points per rail interval and checks that their forward
    /// flow stays in the tube until it leaves the region.
    pub fn is_positively_invariant(&self, f: &PatchyField, n: usize, opts: &SolverOpts) -> bool {
        let g = &self.gamma.path;
        let span = g.t1() - g.t0();
        let search = capped(opts, span + 1.0);
        for k in 1..n {
            let t = g.t0() + span * k as f64 / n as f64;
            let w = 0.9 * self.width(t);
            if w <= 0.0 {
                continue;
            }
            let c = g.eval(t);
            let normal = f.eval_in(self.region, c).perp().normalized();
            for s in [-w, w] {
                let p = c + normal * s;
                if !self.contains(f, p) {
                    continue;
                }
                let Ok(te) = exit_time(f, self.region, p, Direction::Forward, &search) else {
                    return false;
                };
                let path = flow(f, self.region, p, 0.0, te, opts);
                let inside = path.samples[..path.samples.len() - 1]
                    .iter()
                    .all(|q| self.contains(f, q.x) || self.gamma.closest(q.x).1 <= self.width_near(q.x) * 1.05 + 1e-6);
                if !inside {
                    return false;
                }
            }
        }
        true
    }

    fn width_near(&self, p: Point) -> f64 {
        self.width(self.gamma.closest(p).0)
    }

    /// Dense sample of the tube's outline: rails and gate windows.
    pub fn outline(&self) -> Vec<Point> {
        let mut pts: Vec<Point> = self.rails.iter().flat_map(|r| r.samples.iter().map(|s| s.x)).collect();
        for g in &self.gates {
            pts.extend((0..=8).map(|k| g.at(k as f64 / 8.0)));
        }
        pts
    }
}

/// True when no outline point of one tube lies inside another.
pub fn tubes_disjoint(f: &PatchyField, tubes: &[Tube]) -> bool {
    for (i, a) in tubes.iter().enumerate() {
        for b in tubes.iter().skip(i + 1) {
            if a.region != b.region {
                continue;
            }
            let hit = |x: &Tube, y: &Tube| x.outline().iter().chain(x.gamma.path.samples.iter().map(|s| &s.x)).any(|&p| y.contains(f, p));
            if hit(a, b) || hit(b, a) {
                return false;
            }
        }
    }
    true
}

/// Part of `seg` inside the closed disk of radius `r` around `c`.
pub(crate) fn clip_to_ball(seg: &Segment, c: Point, r: f64) -> Option<Segment> {
    let (s0, s1) = ball_params(seg, c, r)?;
    Some(Segment::new(seg.at(s0), seg.at(s1)))
}

/// Parameter interval of `seg` inside the disk, if non-empty.
pub(crate) fn ball_params(seg: &Segment, c: Point, r: f64) -> Option<(f64, f64)> {
    let d = seg.dir();
    let a = d.dot(d);
    if a == 0.0 {
        return None;
    }
    let m = seg.a - c;
    let b = m.dot(d);
    let cc = m.dot(m) - r * r;
    let disc = b * b - a * cc;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s0 = ((-b - sq) / a).max(0.0);
    let s1 = ((-b + sq) / a).min(1.0);
    (s1 > s0).then_some((s0, s1))
}
