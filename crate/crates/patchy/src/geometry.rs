//! Planar primitives: points, segments, simple polygons and set differences of polygons.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Snap tolerance for point/boundary classification.
pub const TOL_GEO: f64 = 1e-9;

/// Offset used to probe which side of a boundary piece belongs to a region.
const SIDE_PROBE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon has a zero-length edge at vertex {0}")]
    RepeatedVertex(usize),
    #[error("polygon has zero area")]
    ZeroArea,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3d cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise rotation by a right angle.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    pub fn lerp(self, o: Point, s: f64) -> Point {
        self + (o - self) * s
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

/// How two segments meet, in parameters of the first one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Crossing {
    None,
    At(f64),
    Overlap(f64, f64),
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    pub fn len(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn dir(&self) -> Point {
        self.b - self.a
    }

    pub fn at(&self, s: f64) -> Point {
        self.a.lerp(self.b, s)
    }

    pub fn midpoint(&self) -> Point {
        self.at(0.5)
    }

    /// Unit normal pointing to the left of a -> b.
    pub fn left_normal(&self) -> Point {
        self.dir().perp().normalized()
    }

    pub fn closest_param(&self, p: Point) -> f64 {
        let d = self.dir();
        let l2 = d.dot(d);
        if l2 == 0.0 {
            return 0.0;
        }
        ((p - self.a).dot(d) / l2).clamp(0.0, 1.0)
    }

    pub fn dist_to(&self, p: Point) -> f64 {
        self.at(self.closest_param(p)).dist(p)
    }

    pub fn dist_to_segment(&self, o: &Segment) -> f64 {
        if !matches!(self.crossing(o), Crossing::None) {
            return 0.0;
        }
        self.dist_to(o.a)
            .min(self.dist_to(o.b))
            .min(o.dist_to(self.a))
            .min(o.dist_to(self.b))
    }

    pub fn crossing(&self, o: &Segment) -> Crossing {
        let r = self.dir();
        let s = o.dir();
        let qp = o.a - self.a;
        let denom = r.cross(s);
        let scale = r.norm() * s.norm();
        let eps = 1e-12;
        if denom.abs() <= eps * scale.max(f64::MIN_POSITIVE) {
            if qp.cross(r).abs() > TOL_GEO * r.norm().max(1.0) {
                return Crossing::None;
            }
            let r2 = r.dot(r);
            if r2 == 0.0 {
                return Crossing::None;
            }
            let t0 = qp.dot(r) / r2;
            let t1 = (o.b - self.a).dot(r) / r2;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            let lo = lo.max(0.0);
            let hi = hi.min(1.0);
            if lo > hi + eps {
                return Crossing::None;
            }
            if hi - lo <= eps {
                return Crossing::At(lo.clamp(0.0, 1.0));
            }
            return Crossing::Overlap(lo, hi);
        }
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        let slack = 1e-12;
        if (-slack..=1.0 + slack).contains(&t) && (-slack..=1.0 + slack).contains(&u) {
            Crossing::At(t.clamp(0.0, 1.0))
        } else {
            Crossing::None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Interior,
    Boundary,
    Exterior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClipMode {
    Inside,
    Outside,
}

/// Polygon edge with its outward unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub seg: Segment,
    pub outward: Point,
}

/// Simple polygon, stored counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl TryFrom<Vec<Point>> for Polygon {
    type Error = GeometryError;
    fn try_from(v: Vec<Point>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Point> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        for i in 0..n {
            if vertices[i].dist(vertices[(i + 1) % n]) <= TOL_GEO {
                return Err(GeometryError::RepeatedVertex(i));
            }
        }
        let area = signed_area(&vertices);
        let scale = bbox_diag(&vertices).max(1.0);
        if area.abs() <= TOL_GEO * scale * scale {
            return Err(GeometryError::ZeroArea);
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let poly = Polygon { vertices };
        poly.check_simple()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Polygon::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let n = self.vertices.len();
        let segs: Vec<Segment> = (0..n).map(|i| self.edge_segment(i)).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                match segs[i].crossing(&segs[j]) {
                    Crossing::None => {}
                    Crossing::Overlap(..) => return Err(GeometryError::SelfIntersecting(i, j)),
                    Crossing::At(t) => {
                        if !adjacent {
                            return Err(GeometryError::SelfIntersecting(i, j));
                        }
                        // adjacent edges may only share their common vertex
                        let shared = if j == i + 1 { 1.0 } else { 0.0 };
                        if (t - shared).abs() > 1e-9 {
                            return Err(GeometryError::SelfIntersecting(i, j));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn edge_segment(&self, i: usize) -> Segment {
        let n = self.vertices.len();
        Segment::new(self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn edge(&self, i: usize) -> Edge {
        let seg = self.edge_segment(i);
        let d = seg.dir();
        Edge {
            seg,
            outward: Point::new(d.y, -d.x).normalized(),
        }
    }

    pub fn edges(&self) -> Vec<Edge> {
        (0..self.vertices.len()).map(|i| self.edge(i)).collect()
    }

    /// True when the interior angle at vertex `i` is below pi.
    pub fn is_convex_vertex(&self, i: usize) -> bool {
        let n = self.vertices.len();
        let prev = self.vertices[(i + n - 1) % n];
        let cur = self.vertices[i];
        let next = self.vertices[(i + 1) % n];
        (cur - prev).cross(next - cur) > 0.0
    }

    pub fn bbox(&self) -> (Point, Point) {
        bbox(&self.vertices)
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        (0..self.vertices.len())
            .map(|i| self.edge_segment(i).dist_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    fn winding(&self, p: Point) -> i32 {
        let n = self.vertices.len();
        let mut w = 0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if a.y <= p.y {
                if b.y > p.y && (b - a).cross(p - a) > 0.0 {
                    w += 1;
                }
            } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    pub fn classify_point(&self, p: Point, tol: f64) -> PointClass {
        if self.boundary_distance(p) <= tol {
            PointClass::Boundary
        } else if self.winding(p) != 0 {
            PointClass::Interior
        } else {
            PointClass::Exterior
        }
    }

    pub fn contains_closed(&self, p: Point) -> bool {
        self.classify_point(p, TOL_GEO) != PointClass::Exterior
    }

    pub fn contains_open(&self, p: Point) -> bool {
        self.classify_point(p, TOL_GEO) == PointClass::Interior
    }

    /// Whether direction `v` points into the open polygon from `p`.
    ///
    /// At a regular edge point the test is `<v, n> < 0` against the outward
    /// normal. At a convex corner both incident edges must agree; at a reflex
    /// corner either one suffices.
    pub fn tangent_cone_interior_contains(&self, p: Point, v: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        if let Some(i) = self.vertices.iter().position(|q| q.dist(p) <= tol) {
            let before = self.edge((i + n - 1) % n).outward.dot(v) < 0.0;
            let after = self.edge(i).outward.dot(v) < 0.0;
            return if self.is_convex_vertex(i) {
                before && after
            } else {
                before || after
            };
        }
        for i in 0..n {
            let e = self.edge(i);
            if e.seg.dist_to(p) <= tol {
                return e.outward.dot(v) < 0.0;
            }
        }
        self.winding(p) != 0
    }

    pub fn clip_segment(&self, seg: &Segment, mode: ClipMode) -> Vec<Segment> {
        let edges: Vec<Segment> = (0..self.len()).map(|i| self.edge_segment(i)).collect();
        split_and_keep(seg, &edges, |p| {
            let c = self.classify_point(p, TOL_GEO);
            match mode {
                ClipMode::Inside => c != PointClass::Exterior,
                ClipMode::Outside => c == PointClass::Exterior,
            }
        })
    }
}

/// Splits `seg` at every crossing with `cutters` and keeps the pieces whose
/// midpoint satisfies `keep`, merging consecutive kept pieces.
pub fn split_and_keep(seg: &Segment, cutters: &[Segment], keep: impl Fn(Point) -> bool) -> Vec<Segment> {
    let mut params = vec![0.0, 1.0];
    for c in cutters {
        match seg.crossing(c) {
            Crossing::None => {}
            Crossing::At(t) => params.push(t),
            Crossing::Overlap(a, b) => {
                params.push(a);
                params.push(b);
            }
        }
    }
    params.sort_by(f64::total_cmp);
    params.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let len = seg.len();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in params.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if (s1 - s0) * len <= TOL_GEO {
            continue;
        }
        if keep(seg.at(0.5 * (s0 + s1))) {
            match out.last_mut() {
                Some(last) if (s0 - last.1).abs() * len <= TOL_GEO => last.1 = s1,
                _ => out.push((s0, s1)),
            }
        }
    }
    out.into_iter()
        .map(|(s0, s1)| Segment::new(seg.at(s0), seg.at(s1)))
        .collect()
}

/// Which input polygon a region boundary piece came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeSource {
    Base,
    Removed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub seg: Segment,
    /// Unit normal pointing into the region.
    pub inward: Point,
    pub source: EdgeSource,
}

/// A polygon with other polygons removed from it: `base \ (removed_1 ∪ ...)`.
///
/// Removed polygons are open sets, so their boundary stays in the region
/// unless it lies inside another removed polygon. Boundary edges are
/// computed explicitly and merged along straight runs.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonalRegion {
    base: Polygon,
    removed: Vec<Polygon>,
    edges: Vec<BoundaryEdge>,
    vertices: Vec<Point>,
}

impl PolygonalRegion {
    pub fn difference(base: &Polygon, removed: &[Polygon]) -> Self {
        let (lo, hi) = base.bbox();
        let removed: Vec<Polygon> = removed
            .iter()
            .filter(|r| {
                let (rlo, rhi) = r.bbox();
                rlo.x <= hi.x + TOL_GEO && rhi.x >= lo.x - TOL_GEO && rlo.y <= hi.y + TOL_GEO && rhi.y >= lo.y - TOL_GEO
            })
            .cloned()
            .collect();

        let mut candidates: Vec<(Segment, EdgeSource)> = base
            .edges()
            .into_iter()
            .map(|e| (e.seg, EdgeSource::Base))
            .collect();
        for (k, r) in removed.iter().enumerate() {
            candidates.extend(r.edges().into_iter().map(|e| (e.seg, EdgeSource::Removed(k))));
        }
        let cutters: Vec<Segment> = candidates.iter().map(|c| c.0).collect();

        let inside = |q: Point| {
            base.classify_point(q, TOL_GEO) == PointClass::Interior
                && removed.iter().all(|r| r.classify_point(q, TOL_GEO) == PointClass::Exterior)
        };

        let mut edges: Vec<BoundaryEdge> = Vec::new();
        for (ci, (seg, source)) in candidates.iter().enumerate() {
            let mut params = vec![0.0, 1.0];
            for (cj, c) in cutters.iter().enumerate() {
                if ci == cj {
                    continue;
                }
                match seg.crossing(c) {
                    Crossing::None => {}
                    Crossing::At(t) => params.push(t),
                    Crossing::Overlap(a, b) => {
                        params.push(a);
                        params.push(b);
                    }
                }
            }
            params.sort_by(f64::total_cmp);
            params.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
            let normal = seg.left_normal();
            let mut run: Option<(f64, f64, Point)> = None;
            for w in params.windows(2) {
                let (s0, s1) = (w[0], w[1]);
                if (s1 - s0) * seg.len() <= TOL_GEO {
                    continue;
                }
                let m = seg.at(0.5 * (s0 + s1));
                let plus = inside(m + normal * SIDE_PROBE);
                let minus = inside(m - normal * SIDE_PROBE);
                let piece = match (plus, minus) {
                    (true, false) => Some(normal),
                    (false, true) => Some(-normal),
                    _ => None,
                };
                match (piece, run) {
                    (Some(n), Some((a, _, rn))) if rn == n => run = Some((a, s1, n)),
                    (Some(n), Some((a, b, rn))) => {
                        push_edge(&mut edges, Segment::new(seg.at(a), seg.at(b)), rn, *source);
                        run = Some((s0, s1, n));
                    }
                    (Some(n), None) => run = Some((s0, s1, n)),
                    (None, Some((a, b, rn))) => {
                        push_edge(&mut edges, Segment::new(seg.at(a), seg.at(b)), rn, *source);
                        run = None;
                    }
                    (None, None) => {}
                }
            }
            if let Some((a, b, rn)) = run {
                push_edge(&mut edges, Segment::new(seg.at(a), seg.at(b)), rn, *source);
            }
        }

        let mut vertices: Vec<Point> = Vec::new();
        for e in &edges {
            for p in [e.seg.a, e.seg.b] {
                if vertices.iter().all(|v| v.dist(p) > 10.0 * TOL_GEO) {
                    vertices.push(p);
                }
            }
        }
        PolygonalRegion {
            base: base.clone(),
            removed,
            edges,
            vertices,
        }
    }

    pub fn base(&self) -> &Polygon {
        &self.base
    }

    pub fn removed(&self) -> &[Polygon] {
        &self.removed
    }

    pub fn edges(&self) -> &[BoundaryEdge] {
        &self.edges
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Indices of boundary edges with an endpoint at `v`.
    pub fn edges_at(&self, v: Point, tol: f64) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.seg.a.dist(v) <= tol || e.seg.b.dist(v) <= tol)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn boundary_distance(&self, p: Point) -> f64 {
        self.edges.iter().map(|e| e.seg.dist_to(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn classify_point(&self, p: Point, tol: f64) -> PointClass {
        if self.boundary_distance(p) <= tol {
            PointClass::Boundary
        } else if self.base.classify_point(p, tol) == PointClass::Interior
            && self.removed.iter().all(|r| r.classify_point(p, tol) == PointClass::Exterior)
        {
            PointClass::Interior
        } else {
            PointClass::Exterior
        }
    }

    /// Membership in the closure, with snapping.
    pub fn contains_closed(&self, p: Point) -> bool {
        self.base.contains_closed(p) && self.removed.iter().all(|r| !r.contains_open(p))
    }

    pub fn clip_segment(&self, seg: &Segment) -> Vec<Segment> {
        let cutters: Vec<Segment> = self.edges.iter().map(|e| e.seg).collect();
        split_and_keep(seg, &cutters, |p| self.contains_closed(p))
    }
}

fn push_edge(edges: &mut Vec<BoundaryEdge>, seg: Segment, inward: Point, source: EdgeSource) {
    if seg.len() <= TOL_GEO {
        return;
    }
    let dup = edges.iter().any(|e| {
        (e.seg.a.dist(seg.a) <= 10.0 * TOL_GEO && e.seg.b.dist(seg.b) <= 10.0 * TOL_GEO)
            || (e.seg.a.dist(seg.b) <= 10.0 * TOL_GEO && e.seg.b.dist(seg.a) <= 10.0 * TOL_GEO)
    });
    if !dup {
        edges.push(BoundaryEdge { seg, inward, source });
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i].cross(v[(i + 1) % n])).sum::<f64>()
}

pub fn bbox(v: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in v {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

fn bbox_diag(v: &[Point]) -> f64 {
    let (lo, hi) = bbox(v);
    lo.dist(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Polygon {
        Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn classify_square_points() {
        let sq = unit_square();
        assert_eq!(sq.classify_point(Point::new(0.5, 0.5), TOL_GEO), PointClass::Interior);
        assert_eq!(sq.classify_point(Point::new(1.0, 0.3), TOL_GEO), PointClass::Boundary);
        assert_eq!(sq.classify_point(Point::new(1.0 + 5e-10, 0.3), TOL_GEO), PointClass::Boundary);
        assert_eq!(sq.classify_point(Point::new(1.5, 0.5), TOL_GEO), PointClass::Exterior);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let cw = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.area() > 0.0);
        let e = cw.edge(0);
        // outward normal of the first edge points away from the centre
        let c = Point::new(0.5, 0.5);
        assert!(e.outward.dot(e.seg.midpoint() - c) > 0.0);
    }

    #[test]
    fn rejects_bad_polygons() {
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(GeometryError::TooFewVertices(2))
        );
        assert_eq!(
            Polygon::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)]),
            Err(GeometryError::ZeroArea)
        );
        let bowtie = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(3.0, 0.0),
            Point::new(0.0, 2.0),
            Point::new(1.0, 3.0),
        ]);
        assert!(matches!(bowtie, Err(GeometryError::SelfIntersecting(..))));
        assert!(matches!(
            Polygon::new(vec![Point::new(0.0, f64::NAN), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]),
            Err(GeometryError::NonFinite(0))
        ));
    }

    #[test]
    fn tangent_cone_on_edges_and_corners() {
        let sq = unit_square();
        assert!(sq.tangent_cone_interior_contains(Point::new(0.0, 0.5), Point::new(1.0, 0.0), TOL_GEO));
        assert!(!sq.tangent_cone_interior_contains(Point::new(0.0, 0.5), Point::new(-1.0, 0.0), TOL_GEO));
        assert!(!sq.tangent_cone_interior_contains(Point::new(0.0, 0.5), Point::new(0.0, 1.0), TOL_GEO));
        assert!(sq.tangent_cone_interior_contains(Point::new(0.0, 0.0), Point::new(1.0, 1.0), TOL_GEO));
        assert!(!sq.tangent_cone_interior_contains(Point::new(0.0, 0.0), Point::new(1.0, -0.1), TOL_GEO));
    }

    #[test]
    fn tangent_cone_at_reflex_corner() {
        // L-shape with the reflex corner at (1,1)
        let l = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(!l.is_convex_vertex(3));
        let c = Point::new(1.0, 1.0);
        assert!(l.tangent_cone_interior_contains(c, Point::new(1.0, -0.5), TOL_GEO));
        assert!(l.tangent_cone_interior_contains(c, Point::new(-0.5, 1.0), TOL_GEO));
        assert!(!l.tangent_cone_interior_contains(c, Point::new(1.0, 1.0), TOL_GEO));
    }

    #[test]
    fn clip_segment_inside_and_outside() {
        let sq = unit_square();
        let s = Segment::new(Point::new(-1.0, 0.5), Point::new(2.0, 0.5));
        let inside = sq.clip_segment(&s, ClipMode::Inside);
        assert_eq!(inside.len(), 1);
        assert!(inside[0].a.dist(Point::new(0.0, 0.5)) < 1e-12);
        assert!(inside[0].b.dist(Point::new(1.0, 0.5)) < 1e-12);
        let outside = sq.clip_segment(&s, ClipMode::Outside);
        assert_eq!(outside.len(), 2);
        let total: f64 = inside.iter().chain(&outside).map(Segment::len).sum();
        assert!((total - s.len()).abs() < 1e-12);
    }

    #[test]
    fn clip_segment_along_an_edge_counts_as_inside() {
        let sq = unit_square();
        let s = Segment::new(Point::new(-1.0, 0.0), Point::new(0.5, 0.0));
        let inside = sq.clip_segment(&s, ClipMode::Inside);
        assert_eq!(inside.len(), 1);
        assert!((inside[0].len() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn difference_of_overlapping_squares() {
        let a = Polygon::rect(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = Polygon::rect(1.0, 0.0, 3.0, 2.0).unwrap();
        let d = PolygonalRegion::difference(&a, &[b]);
        assert_eq!(d.edges().len(), 4);
        let perimeter: f64 = d.edges().iter().map(|e| e.seg.len()).sum();
        assert!((perimeter - 6.0).abs() < 1e-12);
        let right = d
            .edges()
            .iter()
            .find(|e| (e.seg.a.x - 1.0).abs() < 1e-12 && (e.seg.b.x - 1.0).abs() < 1e-12)
            .unwrap();
        assert_eq!(right.source, EdgeSource::Removed(0));
        assert!(right.inward.dist(Point::new(-1.0, 0.0)) < 1e-12);
        assert_eq!(d.classify_point(Point::new(0.5, 1.0), TOL_GEO), PointClass::Interior);
        assert_eq!(d.classify_point(Point::new(1.0, 1.0), TOL_GEO), PointClass::Boundary);
        assert_eq!(d.classify_point(Point::new(1.5, 1.0), TOL_GEO), PointClass::Exterior);
        assert_eq!(d.vertices().len(), 4);
    }

    #[test]
    fn difference_with_notch_and_hole() {
        let a = Polygon::rect(0.0, 0.0, 4.0, 2.0).unwrap();
        let notch = Polygon::rect(2.0, 0.5, 5.0, 1.5).unwrap();
        let d = PolygonalRegion::difference(&a, &[notch]);
        assert_eq!(d.vertices().len(), 8);
        let perimeter: f64 = d.edges().iter().map(|e| e.seg.len()).sum();
        // outer 4+2+4+2 minus notch mouth 1 plus notch walls 2+1+2
        assert!((perimeter - 16.0).abs() < 1e-9, "{perimeter}");

        let hole = Polygon::rect(1.0, 0.5, 1.5, 1.0).unwrap();
        let h = PolygonalRegion::difference(&a, &[hole]);
        assert_eq!(h.edges().len(), 8);
        let inner = h
            .edges()
            .iter()
            .find(|e| e.source == EdgeSource::Removed(0) && (e.seg.a.y - 0.5).abs() < 1e-12 && (e.seg.b.y - 0.5).abs() < 1e-12)
            .unwrap();
        assert!(inner.inward.dist(Point::new(0.0, -1.0)) < 1e-12);
    }

    #[test]
    fn region_clip_segment() {
        let a = Polygon::rect(0.0, 0.0, 2.0, 2.0).unwrap();
        let b = Polygon::rect(1.0, 0.0, 3.0, 2.0).unwrap();
        let d = PolygonalRegion::difference(&a, &[b]);
        let s = Segment::new(Point::new(-1.0, 1.0), Point::new(4.0, 1.0));
        let pieces = d.clip_segment(&s);
        assert_eq!(pieces.len(), 1);
        assert!((pieces[0].len() - 1.0).abs() < 1e-12);
    }
}
