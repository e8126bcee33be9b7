use serde::Serialize;

use crate::geometry::Point;

/// Tolerance below which consecutive piece endpoints count as continuous.
pub const JOIN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Point,
}

impl Sample {
    pub fn new(t: f64, x: Point) -> Self {
        Sample { t, x }
    }
}

/// A stretch of the path driven by one smooth field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Piece {
    /// Position of the patch whose field drives this piece.
    pub region: usize,
    /// False when a drift term was added to the field.
    pub classical: bool,
    pub samples: Vec<Sample>,
}

impl Piece {
    pub fn t0(&self) -> f64 {
        self.samples[0].t
    }

    pub fn t1(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn start(&self) -> Point {
        self.samples[0].x
    }

    pub fn end(&self) -> Point {
        self.samples[self.samples.len() - 1].x
    }

    pub fn duration(&self) -> f64 {
        self.t1() - self.t0()
    }

    /// Linear interpolation; clamps outside the piece.
    pub fn eval(&self, t: f64) -> Point {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0].x;
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1].x;
        }
        let k = s.partition_point(|q| q.t <= t);
        let (a, b) = (s[k - 1], s[k]);
        let dt = b.t - a.t;
        if dt <= 0.0 {
            return b.x;
        }
        a.x.lerp(b.x, (t - a.t) / dt)
    }

    /// The part of this piece on `[a, b]`, with interpolated end samples.
    pub fn restrict(&self, a: f64, b: f64) -> Option<Piece> {
        let a = a.max(self.t0());
        let b = b.min(self.t1());
        if b < a {
            return None;
        }
        let mut samples = vec![Sample::new(a, self.eval(a))];
        samples.extend(self.samples.iter().filter(|s| s.t > a && s.t < b).copied());
        if b > a {
            samples.push(Sample::new(b, self.eval(b)));
        }
        Some(Piece {
            region: self.region,
            classical: self.classical,
            samples,
        })
    }

    pub fn shifted(&self, dt: f64) -> Piece {
        Piece {
            region: self.region,
            classical: self.classical,
            samples: self.samples.iter().map(|s| Sample::new(s.t + dt, s.x)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JumpMark {
    pub t: f64,
    pub from: Point,
    pub to: Point,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub steps: usize,
    pub events: usize,
}

/// Left-continuous piecewise path. `origin` is the value at the initial
/// time, which differs from the first piece's start when a jump happens
/// right after it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub origin: Sample,
    pub pieces: Vec<Piece>,
    pub jump_marks: Vec<JumpMark>,
    pub stats: SolverStats,
}

impl Trajectory {
    pub fn new(origin: Sample, pieces: Vec<Piece>) -> Self {
        Trajectory {
            origin,
            pieces,
            jump_marks: Vec::new(),
            stats: SolverStats::default(),
        }
    }

    /// A path that stays at `x` on `[t0, t1]` without a driving field.
    pub fn constant(region: usize, t0: f64, t1: f64, x: Point) -> Self {
        let piece = Piece {
            region,
            classical: true,
            samples: vec![Sample::new(t0, x), Sample::new(t1, x)],
        };
        Trajectory::new(Sample::new(t0, x), vec![piece])
    }

    pub fn t0(&self) -> f64 {
        self.origin.t
    }

    pub fn t1(&self) -> f64 {
        self.pieces.last().map_or(self.origin.t, Piece::t1)
    }

    pub fn start(&self) -> Point {
        self.pieces.first().map_or(self.origin.x, Piece::start)
    }

    pub fn end(&self) -> Point {
        self.pieces.last().map_or(self.origin.x, Piece::end)
    }

    pub fn end_region(&self) -> Option<usize> {
        self.pieces.last().map(|p| p.region)
    }

    /// Left-continuous value.
    pub fn eval(&self, t: f64) -> Point {
        if t <= self.t0() || self.pieces.is_empty() {
            return self.origin.x;
        }
        let k = self.pieces.partition_point(|p| p.t1() < t);
        match self.pieces.get(k) {
            Some(p) => p.eval(t),
            None => self.end(),
        }
    }

    /// Right limit.
    pub fn eval_right(&self, t: f64) -> Point {
        if self.pieces.is_empty() || t < self.t0() {
            return self.origin.x;
        }
        let k = self.pieces.partition_point(|p| p.t1() <= t);
        match self.pieces.get(k) {
            Some(p) if p.t0() <= t => p.eval(t),
            Some(p) => p.start(),
            None => self.end(),
        }
    }

    /// Region of the piece active just after `t`.
    pub fn region_right(&self, t: f64) -> Option<usize> {
        let k = self.pieces.partition_point(|p| p.t1() <= t);
        self.pieces.get(k).or(self.pieces.last()).map(|p| p.region)
    }

    pub fn time_shifted(&self, dt: f64) -> Trajectory {
        Trajectory {
            origin: Sample::new(self.origin.t + dt, self.origin.x),
            pieces: self.pieces.iter().map(|p| p.shifted(dt)).collect(),
            jump_marks: self
                .jump_marks
                .iter()
                .map(|j| JumpMark { t: j.t + dt, ..*j })
                .collect(),
            stats: self.stats.clone(),
        }
    }

    /// The path on `[a, b]`; the value at `a` is the left limit.
    pub fn restrict(&self, a: f64, b: f64) -> Trajectory {
        let a = a.max(self.t0());
        let b = b.min(self.t1()).max(a);
        let origin = Sample::new(a, self.eval(a));
        let mut pieces = Vec::new();
        for p in &self.pieces {
            if p.t1() < a || p.t0() > b {
                continue;
            }
            // skip pieces that only touch `a` from the left
            if p.t1() <= a && p.duration() > 0.0 {
                continue;
            }
            if p.t0() >= b && b > a {
                continue;
            }
            if let Some(q) = p.restrict(a, b) {
                if q.samples.len() >= 2 || (a == b && pieces.is_empty()) {
                    pieces.push(q);
                }
            }
        }
        let jump_marks = self
            .jump_marks
            .iter()
            .filter(|j| j.t >= a && j.t < b)
            .copied()
            .collect();
        Trajectory {
            origin,
            pieces,
            jump_marks,
            stats: self.stats.clone(),
        }
    }

    /// Appends `other`, which must start where `self` ends in time. A jump
    /// is created if the positions differ.
    pub fn append(&mut self, other: Trajectory) {
        if self.pieces.is_empty() {
            let origin = self.origin;
            *self = other;
            self.origin = origin;
            return;
        }
        self.pieces.extend(other.pieces);
        self.jump_marks.extend(other.jump_marks);
        self.stats.steps += other.stats.steps;
        self.stats.events += other.stats.events;
    }

    /// Discontinuities `(t, left, right)` larger than `tol`, including one at
    /// the initial time.
    pub fn discontinuities(&self, tol: f64) -> Vec<JumpMark> {
        let mut out = Vec::new();
        if let Some(p) = self.pieces.first() {
            if p.start().dist(self.origin.x) > tol {
                out.push(JumpMark {
                    t: self.t0(),
                    from: self.origin.x,
                    to: p.start(),
                });
            }
        }
        for w in self.pieces.windows(2) {
            if w[0].end().dist(w[1].start()) > tol {
                out.push(JumpMark {
                    t: w[0].t1(),
                    from: w[0].end(),
                    to: w[1].start(),
                });
            }
        }
        out
    }

    /// Sum of all discontinuity sizes.
    pub fn jump_budget(&self) -> f64 {
        self.discontinuities(0.0).iter().map(|j| j.from.dist(j.to)).fold(0.0, |acc, d| acc + d)
    }

    pub fn sample_count(&self) -> usize {
        self.pieces.iter().map(|p| p.samples.len()).sum()
    }

    /// Every sample time plus piece boundaries, sorted and unique.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.pieces.iter().flat_map(|p| p.samples.iter().map(|s| s.t)).collect();
        ts.push(self.t0());
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Drops pieces of zero duration that carry no jump.
    pub fn compact(mut self) -> Trajectory {
        let n = self.pieces.len();
        if n <= 1 {
            return self;
        }
        let mut keep = Vec::with_capacity(n);
        for p in self.pieces.drain(..) {
            if p.duration() <= 0.0 && keep.last().is_some_and(|q: &Piece| q.end().dist(p.start()) <= JOIN_TOL) {
                continue;
            }
            keep.push(p);
        }
        self.pieces = keep;
        self
    }
}

/// Sampled sup-norm distance on `[a, b]`, including both one-sided limits
/// at every discontinuity. Exact for the piecewise-linear interpolants.
pub fn sup_distance(x: &Trajectory, y: &Trajectory, a: f64, b: f64) -> f64 {
    let mut ts: Vec<f64> = x.times().into_iter().chain(y.times()).filter(|&t| t >= a && t <= b).collect();
    ts.push(a);
    ts.push(b);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut m: f64 = 0.0;
    for t in ts {
        m = m.max(x.eval(t).dist(y.eval(t)));
        if t < b {
            m = m.max(x.eval_right(t).dist(y.eval_right(t)));
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(region: usize, t0: f64, t1: f64, a: Point, b: Point) -> Piece {
        Piece {
            region,
            classical: true,
            samples: vec![Sample::new(t0, a), Sample::new(t1, b)],
        }
    }

    fn jumpy() -> Trajectory {
        Trajectory::new(
            Sample::new(0.0, Point::new(0.0, 0.0)),
            vec![
                line(0, 0.0, 1.0, Point::new(0.0, 0.0), Point::new(1.0, 0.0)),
                line(1, 1.0, 2.0, Point::new(1.0, 0.5), Point::new(2.0, 0.5)),
            ],
        )
    }

    #[test]
    fn left_and_right_values() {
        let y = jumpy();
        assert_eq!(y.eval(1.0), Point::new(1.0, 0.0));
        assert_eq!(y.eval_right(1.0), Point::new(1.0, 0.5));
        assert_eq!(y.eval(0.5), Point::new(0.5, 0.0));
        assert_eq!(y.eval(1.5), Point::new(1.5, 0.5));
        assert_eq!(y.eval(2.0), Point::new(2.0, 0.5));
        assert_eq!(y.eval_right(2.0), Point::new(2.0, 0.5));
        assert_eq!(y.region_right(1.0), Some(1));
        assert_eq!(y.region_right(0.3), Some(0));
    }

    #[test]
    fn discontinuities_and_budget() {
        let y = jumpy();
        let d = y.discontinuities(1e-12);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].t, 1.0);
        assert!((y.jump_budget() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn restrict_keeps_left_limit() {
        let y = jumpy();
        let r = y.restrict(0.5, 1.0);
        assert_eq!(r.pieces.len(), 1);
        assert_eq!(r.end(), Point::new(1.0, 0.0));
        let s = y.restrict(1.0, 1.5);
        assert_eq!(s.origin.x, Point::new(1.0, 0.0));
        assert_eq!(s.start(), Point::new(1.0, 0.5));
        assert_eq!(s.end(), Point::new(1.5, 0.5));
    }

    #[test]
    fn sup_distance_sees_jumps() {
        let y = jumpy();
        let x = Trajectory::new(
            Sample::new(0.0, Point::ZERO),
            vec![line(0, 0.0, 2.0, Point::ZERO, Point::new(2.0, 0.0))],
        );
        assert!((sup_distance(&x, &y, 0.0, 2.0) - 0.5).abs() < 1e-15);
        assert!(sup_distance(&x, &y, 0.0, 1.0) < 1e-15);
    }

    #[test]
    fn append_creates_jump() {
        let mut a = Trajectory::new(Sample::new(0.0, Point::ZERO), vec![line(0, 0.0, 1.0, Point::ZERO, Point::new(1.0, 0.0))]);
        let b = Trajectory::new(
            Sample::new(1.0, Point::new(1.0, 0.0)),
            vec![line(0, 1.0, 2.0, Point::new(1.0, 0.1), Point::new(2.0, 0.1))],
        );
        a.append(b);
        assert_eq!(a.discontinuities(1e-12).len(), 1);
        assert_eq!(a.t1(), 2.0);
    }
}
