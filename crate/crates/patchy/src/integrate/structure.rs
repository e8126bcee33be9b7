use serde::Serialize;

use super::{exit_time, flow, Direction, Piece, SolveError, SolverOpts, Trajectory};
use crate::field::PatchyField;
use crate::geometry::{Point, Segment};

/// Distance below which a trajectory is considered to pass through a vertex.
pub const VERTEX_HIT_TOL: f64 = 1e-7;

/// Vertex trajectories shorter than this are single points.
pub const DEGENERATE_LEN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Incoming,
    Outgoing,
    Tangent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EdgeClass {
    pub edge: usize,
    pub seg: Segment,
    pub kind: EdgeKind,
    /// Smallest and largest sampled `<g, inward normal>`.
    pub min_flux: f64,
    pub max_flux: f64,
}

/// Sign of the flux of the region's own field across each boundary edge,
/// sampled at `n` interior points. Edges with mixed or vanishing flux are
/// `Tangent`.
pub fn edge_classes(f: &PatchyField, region: usize, n: usize, tol: f64) -> Vec<EdgeClass> {
    f.region(region)
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for s in 1..=n {
                let p = e.seg.at(s as f64 / (n + 1) as f64);
                let v = f.eval_in(region, p).dot(e.inward);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let kind = if lo > tol {
                EdgeKind::Incoming
            } else if hi < -tol {
                EdgeKind::Outgoing
            } else {
                EdgeKind::Tangent
            };
            EdgeClass {
                edge: k,
                seg: e.seg,
                kind,
                min_flux: lo,
                max_flux: hi,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryClassification {
    pub incoming: Vec<usize>,
    pub outgoing: Vec<usize>,
    /// Smallest absolute sampled flux over all edges.
    pub c6: f64,
}

/// Splits the boundary edges of a region into incoming and outgoing sets.
pub fn boundary_classification(f: &PatchyField, region: usize, n: usize) -> Result<BoundaryClassification, SolveError> {
    let mut out = BoundaryClassification {
        incoming: Vec::new(),
        outgoing: Vec::new(),
        c6: f64::INFINITY,
    };
    for c in edge_classes(f, region, n, 1e-12) {
        match c.kind {
            EdgeKind::Incoming => out.incoming.push(c.edge),
            EdgeKind::Outgoing => out.outgoing.push(c.edge),
            EdgeKind::Tangent => {
                return Err(SolveError::MixedSignEdge {
                    patch: f.id(region),
                    edge: c.edge,
                })
            }
        }
        out.c6 = out.c6.min(c.min_flux.abs().min(c.max_flux.abs()));
    }
    Ok(out)
}

/// Maximal trajectory of a region's field through a vertex of the region,
/// parametrized so that the vertex is reached at time 0.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexTrajectory {
    pub region: usize,
    pub vertex: Point,
    pub path: Piece,
    /// Times at which the path meets the region boundary, endpoints included.
    pub crossings: Vec<f64>,
    /// Region vertices the path passes through.
    pub vertex_hits: Vec<Point>,
}

impl VertexTrajectory {
    pub fn t_start(&self) -> f64 {
        self.path.t0()
    }

    pub fn t_end(&self) -> f64 {
        self.path.t1()
    }

    /// Closest sampled approach to `p`: `(time, distance)`.
    pub fn closest(&self, p: Point) -> (f64, f64) {
        let mut best = (self.path.t0(), f64::INFINITY);
        for w in self.path.samples.windows(2) {
            let seg = Segment::new(w[0].x, w[1].x);
            let s = seg.closest_param(p);
            let d = seg.at(s).dist(p);
            if d < best.1 {
                best = (w[0].t + s * (w[1].t - w[0].t), d);
            }
        }
        if self.path.samples.len() == 1 {
            best = (self.path.t0(), self.path.start().dist(p));
        }
        best
    }

    /// First crossing of the path with `seg`: `(path time, parameter on seg)`.
    pub fn crossing(&self, seg: &Segment) -> Option<(f64, f64)> {
        use crate::geometry::Crossing;
        for w in self.path.samples.windows(2) {
            let piece = Segment::new(w[0].x, w[1].x);
            match piece.crossing(seg) {
                Crossing::At(s) | Crossing::Overlap(s, _) => {
                    let t = w[0].t + s * (w[1].t - w[0].t);
                    return Some((t, seg.closest_param(piece.at(s))));
                }
                Crossing::None => {}
            }
        }
        None
    }
}

/// Trajectories of the region's own field through the vertices of its
/// effective region, deduplicated and without degenerate single points.
pub fn vertex_trajectories(f: &PatchyField, region: usize, opts: &SolverOpts) -> Vec<VertexTrajectory> {
    let d = f.region(region);
    let vertices = d.vertices().to_vec();
    let mut out: Vec<VertexTrajectory> = Vec::new();
    for &v in &vertices {
        if out.iter().any(|g| g.vertex_hits.iter().any(|w| w.dist(v) <= VERTEX_HIT_TOL)) {
            continue;
        }
        let speed = f.eval_in(region, v).norm();
        if speed == 0.0 {
            continue;
        }
        let Ok(t_fwd) = exit_time(f, region, v, Direction::Forward, opts) else {
            continue;
        };
        let Ok(t_back) = exit_time(f, region, v, Direction::Backward, opts) else {
            continue;
        };
        // boundary snapping lets a corner flow run a few tolerances outside
        if (t_fwd - t_back) * speed <= DEGENERATE_LEN {
            continue;
        }
        let mut path = flow(f, region, v, 0.0, t_back, opts);
        let fwd = flow(f, region, v, 0.0, t_fwd, opts);
        path.samples.extend(fwd.samples.into_iter().skip(1));
        let mut g = VertexTrajectory {
            region,
            vertex: v,
            path,
            crossings: Vec::new(),
            vertex_hits: Vec::new(),
        };
        let mut crossings = vec![g.t_start(), g.t_end()];
        for &w in &vertices {
            let (t, dist) = g.closest(w);
            if dist <= VERTEX_HIT_TOL {
                g.vertex_hits.push(w);
                crossings.push(t);
            }
        }
        crossings.sort_by(f64::total_cmp);
        crossings.dedup_by(|a, b| (*a - *b).abs() <= 1e3 * opts.tol_t);
        g.crossings = crossings;
        out.push(g);
    }
    out
}

/// Time spent by `y` within distance `c` of the boundary of its current
/// effective region, by linear interpolation of the distance on 16
/// sub-intervals per sample interval.
pub fn boundary_time_measure(f: &PatchyField, y: &Trajectory, c: f64) -> f64 {
    const SUB: usize = 16;
    let dist = |p: Point| f.alpha_star(p).map_or(0.0, |a| f.region(a).boundary_distance(p));
    let mut total = 0.0;
    for piece in &y.pieces {
        for w in piece.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dt = (b.t - a.t) / SUB as f64;
            if dt <= 0.0 {
                continue;
            }
            let mut d0 = dist(a.x);
            for k in 1..=SUB {
                let s = k as f64 / SUB as f64;
                let d1 = dist(a.x.lerp(b.x, s));
                total += dt * below_fraction(d0 - c, d1 - c);
                d0 = d1;
            }
        }
    }
    total
}

/// Fraction of `[0, 1]` where the linear interpolant of `u0, u1` is negative.
fn below_fraction(u0: f64, u1: f64) -> f64 {
    match (u0 < 0.0, u1 < 0.0) {
        (true, true) => 1.0,
        (false, false) => 0.0,
        (true, false) => u0 / (u0 - u1),
        (false, true) => u1 / (u1 - u0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// Largest gap between the five-point derivative and the field.
    pub max_residual: f64,
    pub tolerance: f64,
    /// Number of stencils checked.
    pub checked: usize,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.max_residual <= self.tolerance
    }
}

/// Checks that every classical piece solves its region's equation by
/// comparing a fourth-order difference derivative with the field on each
/// window of five equally spaced samples.
pub fn certify(f: &PatchyField, y: &Trajectory, h: f64) -> Certificate {
    let scale = f.speed_bound().max(1.0);
    let tolerance = scale * (1e3 * h.powi(4) + 1e-11 / h);
    let mut cert = Certificate {
        max_residual: 0.0,
        tolerance,
        checked: 0,
    };
    for piece in y.pieces.iter().filter(|p| p.classical) {
        for w in piece.samples.windows(5) {
            let step = w[1].t - w[0].t;
            if step <= 0.0 || w.windows(2).any(|p| ((p[1].t - p[0].t) - step).abs() > 1e-9 * step.max(1e-300)) {
                continue;
            }
            let deriv = (w[0].x - w[4].x + (w[3].x - w[1].x) * 8.0) * (1.0 / (12.0 * step));
            let r = deriv.dist(f.eval_in(piece.region, w[2].x));
            cert.max_residual = cert.max_residual.max(r * (h / step).powi(4).min(1.0));
            cert.checked += 1;
        }
    }
    cert
}
