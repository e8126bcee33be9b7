use std::collections::BTreeMap;

use serde::Serialize;

use super::capped;
use super::tube::{ball_params, Tube};
use crate::field::PatchyField;
use crate::geometry::{Point, Segment};
use crate::integrate::{
    edge_classes, exit_time, flow_point, vertex_trajectories, Direction, EdgeClass, EdgeKind, SolverOpts, VertexTrajectory,
    VERTEX_HIT_TOL,
};

/// Scenario-fitted surrogates for the constants of the shadowing argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FittedConstants {
    /// Half the smallest distance between two gate points.
    pub lambda_bar: f64,
    /// Lipschitz constant of the flow maps over unit time.
    pub c0: f64,
    /// Ball radius factor separating boundary components around gates.
    pub c3: f64,
    /// Smallest sampled flux across a region edge.
    pub c6: f64,
    /// Tube width factor used when replacing a path inside a region.
    pub c14: f64,
    /// Largest total variation the pipeline accepts.
    pub delta: f64,
}

/// Precomputed geometry of a validated field for the shadowing pipeline.
#[derive(Clone, Debug)]
pub struct ShadowContext {
    pub opts: SolverOpts,
    pub vertex_trajectories: Vec<Vec<VertexTrajectory>>,
    pub edge_classes: Vec<Vec<EdgeClass>>,
    /// Gate points for each ordered pair of region positions `(lower, higher)`.
    pub gates: BTreeMap<(usize, usize), Vec<Point>>,
    pub constants: FittedConstants,
    /// Largest accepted ratio of any stage's jump budget to the input variation.
    pub budget_cap: f64,
}

impl ShadowContext {
    pub fn fit(f: &PatchyField, opts: &SolverOpts) -> ShadowContext {
        let n = f.len();
        let vertex_trajectories: Vec<Vec<VertexTrajectory>> = (0..n).map(|i| vertex_trajectories(f, i, opts)).collect();
        let edge_classes: Vec<Vec<EdgeClass>> = (0..n).map(|i| edge_classes(f, i, 32, 1e-12)).collect();
        let mut ctx = ShadowContext {
            opts: *opts,
            vertex_trajectories,
            edge_classes,
            gates: BTreeMap::new(),
            constants: FittedConstants {
                lambda_bar: 0.0,
                c0: 1.0,
                c3: 1.5,
                c6: 0.0,
                c14: 1.5,
                delta: 0.0,
            },
            budget_cap: 1e3,
        };
        for a in 0..n {
            for b in a + 1..n {
                let g = ctx.gate_points(f, a, b);
                if !g.is_empty() {
                    ctx.gates.insert((a, b), g);
                }
            }
        }
        let all: Vec<Point> = ctx.gates.values().flatten().copied().collect();
        let mut min_gap = f64::INFINITY;
        for (i, p) in all.iter().enumerate() {
            for q in &all[i + 1..] {
                if p.dist(*q) > VERTEX_HIT_TOL {
                    min_gap = min_gap.min(p.dist(*q));
                }
            }
        }
        let (lo, hi) = f.bbox();
        let lambda_bar = if min_gap.is_finite() { 0.5 * min_gap } else { 0.25 * lo.dist(hi) };
        let c6 = ctx
            .edge_classes
            .iter()
            .flatten()
            .filter(|e| e.kind != EdgeKind::Tangent)
            .map(|e| e.min_flux.abs().min(e.max_flux.abs()))
            .fold(f64::INFINITY, f64::min);
        let c3 = ctx.fit_c3(f, lambda_bar);
        let c14 = ctx.fit_c14(f, lambda_bar);
        let c0 = flow_lipschitz(f, opts);
        ctx.constants = FittedConstants {
            lambda_bar,
            c0,
            c3,
            c6: if c6.is_finite() { c6 } else { 0.0 },
            c14,
            delta: 0.5 * (lambda_bar / c14).min(lambda_bar / (2.0 * c3)),
        };
        ctx
    }

    fn is_kind(&self, f: &PatchyField, region: usize, p: Point, kind: EdgeKind) -> bool {
        let _ = f;
        self.edge_classes[region]
            .iter()
            .any(|e| e.kind == kind && e.seg.dist_to(p) <= VERTEX_HIT_TOL)
    }

    /// Points of the outgoing boundary of `a` on the incoming boundary of `b`
    /// that are region vertices or starts of vertex trajectories of `b`.
    fn gate_points(&self, f: &PatchyField, a: usize, b: usize) -> Vec<Point> {
        let mut cands: Vec<Point> = f.region(a).vertices().to_vec();
        cands.extend(f.region(b).vertices());
        cands.extend(self.vertex_trajectories[b].iter().map(|g| g.path.start()));
        let mut out: Vec<Point> = Vec::new();
        for p in cands {
            if self.is_kind(f, a, p, EdgeKind::Outgoing)
                && self.is_kind(f, b, p, EdgeKind::Incoming)
                && !out.iter().any(|q| q.dist(p) <= VERTEX_HIT_TOL)
            {
                out.push(p);
            }
        }
        out.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
        out
    }

    pub fn gates_between(&self, a: usize, b: usize) -> &[Point] {
        self.gates.get(&(a, b)).map_or(&[], Vec::as_slice)
    }

    /// True when `p` lies on a vertex trajectory of `a` or `b`.
    pub fn on_vertex_trajectory(&self, p: Point, a: usize, b: usize) -> bool {
        [a, b]
            .iter()
            .flat_map(|&r| self.vertex_trajectories[r].iter())
            .any(|g| g.closest(p).1 <= VERTEX_HIT_TOL)
    }

    /// Boundary components of `∂D_a ∪ ∂D_b` after removing the balls of
    /// radius `r` around the gates of the pair.
    pub fn boundary_components(&self, f: &PatchyField, a: usize, b: usize, r: f64) -> BoundaryComponents {
        let gates = self.gates_between(a, b);
        let mut segs = Vec::new();
        for reg in [a, b] {
            for e in f.region(reg).edges() {
                segs.extend(subtract_balls(&e.seg, gates, r));
            }
        }
        BoundaryComponents::new(segs)
    }

    /// Smallest distance between distinct components, relative to the ball
    /// radius, over a range of radii.
    fn fit_c3(&self, f: &PatchyField, lambda_bar: f64) -> f64 {
        let mut kappa = f64::INFINITY;
        for (&(a, b), _) in &self.gates {
            for k in 0..3 {
                let lam = lambda_bar / f64::powi(2.0, k);
                let comps = self.boundary_components(f, a, b, lam);
                kappa = kappa.min(comps.separation() / lam);
            }
        }
        if kappa.is_finite() && kappa > 0.0 {
            (3.0 / kappa).max(1.5)
        } else if kappa == 0.0 {
            f64::INFINITY
        } else {
            1.5
        }
    }

    fn fit_c14(&self, f: &PatchyField, lambda_bar: f64) -> f64 {
        let mut kappa = f64::INFINITY;
        for region in 0..f.len() {
            for k in 1..4 {
                let lam = lambda_bar / f64::powi(2.0, k);
                let tubes: Vec<Tube> = self.vertex_trajectories[region].iter().map(|g| Tube::new(f, g, lam, &self.opts)).collect();
                kappa = kappa.min(component_edge_distance(f, region, &tubes, lam) / lam);
            }
        }
        if kappa.is_finite() && kappa > 0.0 {
            (2.5 / kappa).max(1.5)
        } else if kappa == 0.0 {
            f64::INFINITY
        } else {
            1.5
        }
    }

    /// Tubes of width `lambda` around every vertex trajectory of `region`.
    pub fn tubes(&self, f: &PatchyField, region: usize, lambda: f64) -> Vec<Tube> {
        self.vertex_trajectories[region].iter().map(|g| Tube::new(f, g, lambda, &self.opts)).collect()
    }
}

/// Parts of `seg` outside every open ball of radius `r` around `centers`.
fn subtract_balls(seg: &Segment, centers: &[Point], r: f64) -> Vec<Segment> {
    let mut cuts: Vec<(f64, f64)> = centers.iter().filter_map(|&c| ball_params(seg, c, r)).collect();
    cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::new();
    let mut s = 0.0;
    for (a, b) in cuts {
        if a > s {
            out.push(Segment::new(seg.at(s), seg.at(a)));
        }
        s = s.max(b);
    }
    if s < 1.0 {
        out.push(Segment::new(seg.at(s), seg.b));
    }
    out.retain(|p| p.len() > 1e-12);
    out
}

/// Connected components of a set of boundary segments.
#[derive(Clone, Debug)]
pub struct BoundaryComponents {
    segs: Vec<Segment>,
    label: Vec<usize>,
}

impl BoundaryComponents {
    fn new(segs: Vec<Segment>) -> Self {
        let n = segs.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for i in 0..n {
            for j in i + 1..n {
                if segs[i].dist_to_segment(&segs[j]) <= 1e-9 {
                    let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
        let label = (0..n).map(|i| root(&mut parent, i)).collect();
        BoundaryComponents { segs, label }
    }

    /// Component label of a boundary point, `None` inside a removed ball.
    pub fn component_of(&self, p: Point) -> Option<usize> {
        self.segs
            .iter()
            .zip(&self.label)
            .filter(|(s, _)| s.dist_to(p) <= VERTEX_HIT_TOL)
            .map(|(_, &l)| l)
            .min()
    }

    pub fn count(&self) -> usize {
        let mut l = self.label.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }

    /// Smallest distance between segments of different components.
    pub fn separation(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.segs.len() {
            for j in i + 1..self.segs.len() {
                if self.label[i] != self.label[j] {
                    m = m.min(self.segs[i].dist_to_segment(&self.segs[j]));
                }
            }
        }
        m
    }
}

/// Raster estimate, near every tube gate, of the smallest distance between
/// a component of the region minus the tubes and a boundary edge it does
/// not touch.
pub fn component_edge_distance(f: &PatchyField, region: usize, tubes: &[Tube], lambda: f64) -> f64 {
    const N: usize = 48;
    let d = f.region(region);
    let mut rho = f64::INFINITY;
    let centers: Vec<Point> = tubes
        .iter()
        .flat_map(|t| t.gamma.crossings.iter().map(|&th| t.gamma.path.eval(th)))
        .collect();
    for c in centers {
        let half = 4.0 * lambda;
        let s = 2.0 * half / N as f64;
        let at = |i: usize, j: usize| Point::new(c.x - half + (i as f64 + 0.5) * s, c.y - half + (j as f64 + 0.5) * s);
        let free: Vec<bool> = (0..N * N)
            .map(|k| {
                let p = at(k % N, k / N);
                d.contains_closed(p) && !tubes.iter().any(|t| t.contains(f, p))
            })
            .collect();
        let mut comp = vec![usize::MAX; N * N];
        let mut n_comp = 0;
        for start in 0..N * N {
            if !free[start] || comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = n_comp;
            while let Some(k) = stack.pop() {
                let (i, j) = (k % N, k / N);
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push(k - 1);
                }
                if i + 1 < N {
                    nb.push(k + 1);
                }
                if j > 0 {
                    nb.push(k - N);
                }
                if j + 1 < N {
                    nb.push(k + N);
                }
                for m in nb {
                    if free[m] && comp[m] == usize::MAX {
                        comp[m] = n_comp;
                        stack.push(m);
                    }
                }
            }
            n_comp += 1;
        }
        let edges: Vec<Segment> = d.edges().iter().map(|e| e.seg).filter(|e| e.dist_to(c) <= 2.0 * half).collect();
        for label in 0..n_comp {
            let cells: Vec<usize> = (0..N * N).filter(|&k| comp[k] == label).collect();
            let on_border = cells.iter().any(|&k| {
                let (i, j) = (k % N, k / N);
                i == 0 || j == 0 || i + 1 == N || j + 1 == N
            });
            if on_border {
                continue;
            }
            for e in &edges {
                let dmin = cells.iter().map(|&k| e.dist_to(at(k % N, k / N))).fold(f64::INFINITY, f64::min);
                if dmin > s {
                    rho = rho.min(dmin - 0.5 * s);
                }
            }
        }
    }
    rho
}

/// Largest sampled growth of small displacements under the unit-time flow
/// of each region's field.
fn flow_lipschitz(f: &PatchyField, opts: &SolverOpts) -> f64 {
    let mut c0: f64 = 1.0;
    let eps = 1e-6;
    for region in 0..f.len() {
        let (lo, hi) = f.region(region).base().bbox();
        for a in 1..8 {
            for b in 1..8 {
                let p = Point::new(lo.x + (hi.x - lo.x) * a as f64 / 8.0, lo.y + (hi.y - lo.y) * b as f64 / 8.0);
                if !f.in_region_closure(region, p) {
                    continue;
                }
                let t = exit_time(f, region, p, Direction::Forward, &capped(opts, 1.0)).unwrap_or(1.0).min(1.0);
                let x = flow_point(f, region, p, t, opts);
                for dir in [Point::new(eps, 0.0), Point::new(0.0, eps)] {
                    let y = flow_point(f, region, p + dir, t, opts);
                    c0 = c0.max(x.dist(y) / eps);
                }
            }
        }
    }
    c0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadow::tests::generic_demo;

    #[test]
    fn subtracting_balls() {
        let s = Segment::new(Point::new(0.0, 0.0), Point::new(4.0, 0.0));
        let parts = subtract_balls(&s, &[Point::new(1.0, 0.0), Point::new(4.0, 0.0)], 0.5);
        assert_eq!(parts.len(), 2);
        assert!((parts[0].b.x - 0.5).abs() < 1e-12 && (parts[1].a.x - 1.5).abs() < 1e-12 && (parts[1].b.x - 3.5).abs() < 1e-12);
    }

    #[test]
    fn demo_gates_and_constants() {
        let f = generic_demo();
        let ctx = ShadowContext::fit(&f, &SolverOpts::default());
        let g = ctx.gates_between(0, 1);
        let expect = [(2.0, 0.5), (2.0, 1.5), (4.0, 0.5), (4.0, 1.5)];
        assert_eq!(g.len(), 4, "{g:?}");
        for (p, e) in g.iter().zip(expect) {
            assert!(p.dist(Point::new(e.0, e.1)) < 1e-9);
        }
        let c = ctx.constants;
        assert!((c.lambda_bar - 0.5).abs() < 1e-12);
        assert!(c.c3 >= 1.5 && c.c3.is_finite());
        assert!(c.c14 >= 1.5 && c.c14.is_finite(), "{c:?}");
        assert!(c.delta > 1e-2, "{c:?}");
        assert!(c.c6 > 0.0);
    }

    #[test]
    fn components_split_at_gates() {
        let f = generic_demo();
        let ctx = ShadowContext::fit(&f, &SolverOpts::default());
        let comps = ctx.boundary_components(&f, 0, 1, 0.1);
        let a = comps.component_of(Point::new(2.0, 1.0)).unwrap();
        assert_eq!(comps.component_of(Point::new(2.0, 0.9)), Some(a));
        assert_ne!(comps.component_of(Point::new(3.0, 0.5)), Some(a));
        assert_eq!(comps.component_of(Point::new(2.0, 0.55)), None);
        assert!(comps.separation() > 0.1);
    }
}
