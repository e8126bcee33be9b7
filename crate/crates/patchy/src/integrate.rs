//! Forward, backward and impulsively perturbed solutions of the patchy
//! system, exit times, boundary structure of the effective regions and the
//! boundary-proximity time measure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{PatchId, PatchyField};
use crate::geometry::{Point, PointClass};
use crate::perturbation::BvPath;

mod structure;
mod trajectory;

pub use structure::{
    boundary_classification, boundary_time_measure, certify, edge_classes, vertex_trajectories, BoundaryClassification,
    Certificate, EdgeClass, EdgeKind, VertexTrajectory, DEGENERATE_LEN, VERTEX_HIT_TOL,
};
pub use trajectory::{sup_distance, JumpMark, Piece, Sample, SolverStats, Trajectory, JOIN_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("path left every patch at t = {t} near ({}, {})", .at.x, .at.y)]
    OutsideDomain { t: f64, at: Point },
    #[error("region switches accumulate at t = {t} near ({}, {})", .at.x, .at.y)]
    StallDetected { t: f64, at: Point },
    #[error("no backward solution through ({}, {}) at t = {t}", .at.x, .at.y)]
    NoBackwardSolution { t: f64, at: Point },
    #[error("jump at t = {t} lands outside every patch at ({}, {})", .at.x, .at.y)]
    JumpExitsDomain { t: f64, at: Point },
    #[error("no exit from the region within {limit} time units")]
    HorizonExceeded { limit: f64 },
    #[error("edge {edge} of region {patch} has no definite crossing sign")]
    MixedSignEdge { patch: PatchId, edge: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOpts {
    /// Fixed step of the fourth-order Runge-Kutta scheme.
    pub h: f64,
    /// Event localization tolerance in time.
    pub tol_t: f64,
    /// Cap on exit-time searches and horizons.
    pub max_time: f64,
    /// Region switches allowed within `10 * tol_t` before declaring a stall.
    pub max_stall: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            h: 1e-3,
            tol_t: 1e-10,
            max_time: 1e3,
            max_stall: 16,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// Boundary snapping used to locate switching events, much finer than the
/// geometric tolerance so that event times resolve to `tol_t`.
pub const EVENT_TOL: f64 = 1e-12;

pub(crate) fn rk4(vf: &impl Fn(Point) -> Point, x: Point, h: f64) -> Point {
    let k1 = vf(x);
    let k2 = vf(x + k1 * (0.5 * h));
    let k3 = vf(x + k2 * (0.5 * h));
    let k4 = vf(x + k3 * h);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

pub(crate) struct FlowRun {
    pub samples: Vec<Sample>,
    /// First sample where `stop` held, if any.
    pub hit: Option<Sample>,
    pub steps: usize,
}

/// Integrates `vf` from `(t0, x0)` over the signed `duration`, stopping at
/// the first point where `stop` holds (located by bisection).
pub(crate) fn flow_until(
    vf: &impl Fn(Point) -> Point,
    x0: Point,
    t0: f64,
    duration: f64,
    opts: &SolverOpts,
    stop: &impl Fn(Point) -> bool,
) -> FlowRun {
    let dir = if duration < 0.0 { -1.0 } else { 1.0 };
    let total = duration.abs();
    let mut samples = vec![Sample::new(t0, x0)];
    let mut elapsed = 0.0;
    let mut x = x0;
    let mut steps = 0;
    let n_steps = (total / opts.h).ceil() as usize;
    for k in 0..n_steps {
        let target = if k + 1 == n_steps { total } else { (k + 1) as f64 * opts.h };
        let step = target - elapsed;
        if step <= 0.0 {
            break;
        }
        let xn = rk4(vf, x, dir * step);
        steps += 1;
        if stop(xn) {
            let (mut lo, mut hi) = (0.0, step);
            while hi - lo > opts.tol_t {
                let mid = 0.5 * (lo + hi);
                if stop(rk4(vf, x, dir * mid)) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let hit = Sample::new(t0 + dir * (elapsed + hi), rk4(vf, x, dir * hi));
            samples.push(hit);
            return FlowRun {
                samples,
                hit: Some(hit),
                steps,
            };
        }
        x = xn;
        elapsed = target;
        samples.push(Sample::new(t0 + dir * elapsed, x));
    }
    FlowRun { samples, hit: None, steps }
}

/// Classical flow of patch `region`'s field for the signed `duration`.
pub fn flow(f: &PatchyField, region: usize, x0: Point, t0: f64, duration: f64, opts: &SolverOpts) -> Piece {
    let vf = |p: Point| f.eval_in(region, p);
    let run = flow_until(&vf, x0, t0, duration, opts, &|_| false);
    let mut samples = run.samples;
    if duration < 0.0 {
        samples.reverse();
    }
    Piece {
        region,
        classical: true,
        samples,
    }
}

/// End point of the classical flow of patch `region`.
pub fn flow_point(f: &PatchyField, region: usize, x0: Point, duration: f64, opts: &SolverOpts) -> Point {
    let vf = |p: Point| f.eval_in(region, p);
    flow_until(&vf, x0, 0.0, duration, opts, &|_| false)
        .samples
        .last()
        .map_or(x0, |s| s.x)
}

struct StallGuard {
    last: f64,
    count: usize,
    limit: usize,
    window: f64,
}

impl StallGuard {
    fn new(opts: &SolverOpts) -> Self {
        StallGuard {
            last: f64::NEG_INFINITY,
            count: 0,
            limit: opts.max_stall,
            window: 10.0 * opts.tol_t,
        }
    }

    fn event(&mut self, t: f64, at: Point) -> Result<(), SolveError> {
        if (t - self.last).abs() <= self.window {
            self.count += 1;
            if self.count > self.limit {
                return Err(SolveError::StallDetected { t, at });
            }
        } else {
            self.count = 0;
        }
        self.last = t;
        Ok(())
    }
}

/// Integrates `g + drift` from `x` on `[t, t_end]`, switching fields at
/// every change of the active patch. `graze` lists points near which a
/// switch is ignored (used to enumerate continuations at vertices).
fn advance(
    f: &PatchyField,
    mut x: Point,
    mut t: f64,
    t_end: f64,
    drift: Point,
    opts: &SolverOpts,
    graze: &[Point],
    out: &mut Trajectory,
) -> Result<Point, SolveError> {
    let mut guard = StallGuard::new(opts);
    let mut region = f.alpha_star(x).ok_or(SolveError::OutsideDomain { t, at: x })?;
    let near_graze = |p: Point| graze.iter().any(|g| g.dist(p) <= 1e-6);
    while t < t_end {
        let vf = |p: Point| f.eval_in(region, p) + drift;
        let stop = |p: Point| f.alpha_star_within(p, EVENT_TOL) != Some(region) && !near_graze(p);
        let run = flow_until(&vf, x, t, t_end - t, opts, &stop);
        out.stats.steps += run.steps;
        let last = *run.samples.last().expect("non-empty run");
        out.pieces.push(Piece {
            region,
            classical: drift == Point::ZERO,
            samples: run.samples,
        });
        x = last.x;
        t = last.t;
        if run.hit.is_some() {
            out.stats.events += 1;
            guard.event(t, x)?;
            region = f
                .alpha_star_within(x, EVENT_TOL)
                .or_else(|| f.alpha_star(x))
                .ok_or(SolveError::OutsideDomain { t, at: x })?;
        } else {
            break;
        }
    }
    Ok(x)
}

pub fn solve_forward(f: &PatchyField, x0: Point, t0: f64, t1: f64, opts: &SolverOpts) -> Result<Trajectory, SolveError> {
    solve_forward_grazing(f, x0, t0, t1, opts, &[])
}

/// Forward solution that keeps its current field when passing within 1e-6
/// of any point in `graze`.
pub fn solve_forward_grazing(
    f: &PatchyField,
    x0: Point,
    t0: f64,
    t1: f64,
    opts: &SolverOpts,
    graze: &[Point],
) -> Result<Trajectory, SolveError> {
    if t1 - t0 > opts.max_time {
        return Err(SolveError::HorizonExceeded { limit: opts.max_time });
    }
    let mut out = Trajectory::new(Sample::new(t0, x0), Vec::new());
    advance(f, x0, t0, t1, Point::ZERO, opts, graze, &mut out)?;
    if out.pieces.is_empty() {
        let r = f.alpha_star(x0).ok_or(SolveError::OutsideDomain { t: t0, at: x0 })?;
        out.pieces.push(Piece {
            region: r,
            classical: true,
            samples: vec![Sample::new(t0, x0), Sample::new(t1, x0)],
        });
    }
    Ok(out.compact())
}

/// Solution of `y = y0 + int g(y) + w(t) - w(t0)`.
pub fn solve_perturbed(f: &PatchyField, w: &BvPath, y0: Point, t0: f64, t1: f64, opts: &SolverOpts) -> Result<Trajectory, SolveError> {
    if t1 - t0 > opts.max_time {
        return Err(SolveError::HorizonExceeded { limit: opts.max_time });
    }
    f.alpha_star(y0).ok_or(SolveError::OutsideDomain { t: t0, at: y0 })?;
    let mut out = Trajectory::new(Sample::new(t0, y0), Vec::new());
    let mut y = y0;
    let apply_jumps = |y: &mut Point, t: f64, out: &mut Trajectory| -> Result<(), SolveError> {
        for j in w.jumps().iter().filter(|j| j.t == t) {
            let to = *y + j.d;
            if f.alpha_star(to).is_none() {
                return Err(SolveError::JumpExitsDomain { t, at: to });
            }
            out.jump_marks.push(JumpMark { t, from: *y, to });
            *y = to;
        }
        Ok(())
    };
    apply_jumps(&mut y, t0, &mut out)?;
    let mut cuts = w.breakpoints(t0, t1);
    cuts.push(t1);
    let mut t = t0;
    for c in cuts {
        let drift = w.rate_at(t);
        y = advance(f, y, t, c, drift, opts, &[], &mut out)?;
        t = c;
        if c < t1 {
            apply_jumps(&mut y, c, &mut out)?;
        }
    }
    Ok(out.compact())
}

/// Highest patch whose backward flow from `x` stays in its own active set.
pub fn backward_region(f: &PatchyField, x: Point) -> Option<usize> {
    let top = f.alpha_star(x)?;
    (0..=top).rev().find(|&i| {
        if !f.patch(i).domain.contains_closed(x) {
            return false;
        }
        let g = f.eval_in(i, x);
        let speed = g.norm();
        if speed == 0.0 {
            return false;
        }
        let s = 1e-6 / speed;
        let vf = |p: Point| f.eval_in(i, p);
        f.alpha_star(rk4(&vf, x, -s)) == Some(i)
    })
}

pub fn solve_backward(f: &PatchyField, x1: Point, t1: f64, t0: f64, opts: &SolverOpts) -> Result<Trajectory, SolveError> {
    if t1 - t0 > opts.max_time {
        return Err(SolveError::HorizonExceeded { limit: opts.max_time });
    }
    let mut guard = StallGuard::new(opts);
    let mut pieces = Vec::new();
    let mut stats = SolverStats::default();
    let (mut x, mut t) = (x1, t1);
    while t > t0 {
        let region = backward_region(f, x).ok_or(SolveError::NoBackwardSolution { t, at: x })?;
        let vf = |p: Point| f.eval_in(region, p);
        let stop = |p: Point| f.alpha_star_within(p, EVENT_TOL) != Some(region);
        let run = flow_until(&vf, x, t, t0 - t, opts, &stop);
        stats.steps += run.steps;
        let last = *run.samples.last().expect("non-empty run");
        let mut samples = run.samples;
        samples.reverse();
        pieces.push(Piece {
            region,
            classical: true,
            samples,
        });
        x = last.x;
        t = last.t;
        if run.hit.is_some() {
            stats.events += 1;
            guard.event(t, x)?;
        } else {
            break;
        }
    }
    pieces.reverse();
    if pieces.is_empty() {
        let r = f.alpha_star(x1).ok_or(SolveError::OutsideDomain { t: t1, at: x1 })?;
        pieces.push(Piece {
            region: r,
            classical: true,
            samples: vec![Sample::new(t0, x1), Sample::new(t1, x1)],
        });
    }
    let mut out = Trajectory::new(Sample::new(t0, pieces[0].start()), pieces);
    out.stats = stats;
    Ok(out.compact())
}

/// Signed time for the flow of patch `region` from `x0` to leave the closed
/// effective region. Zero when `x0` is already outside it.
pub fn exit_time(f: &PatchyField, region: usize, x0: Point, dir: Direction, opts: &SolverOpts) -> Result<f64, SolveError> {
    if !f.in_region_closure(region, x0) {
        return Ok(0.0);
    }
    let vf = |p: Point| f.eval_in(region, p);
    let d = f.region(region);
    let stop = |p: Point| d.classify_point(p, EVENT_TOL) == PointClass::Exterior;
    let run = flow_until(&vf, x0, 0.0, dir.sign() * opts.max_time, opts, &stop);
    match run.hit {
        Some(hit) => Ok(hit.t),
        None => Err(SolveError::HorizonExceeded { limit: opts.max_time }),
    }
}

/// Time at which the flow of `region` from a point outside the closed
/// effective region first enters it, searching up to `limit`.
pub(crate) fn entry_time(f: &PatchyField, region: usize, x0: Point, dir: Direction, limit: f64, opts: &SolverOpts) -> Option<f64> {
    if f.in_region_closure(region, x0) {
        return Some(0.0);
    }
    let vf = |p: Point| f.eval_in(region, p);
    let stop = |p: Point| f.in_region_closure(region, p);
    flow_until(&vf, x0, 0.0, dir.sign() * limit, opts, &stop).hit.map(|h| h.t)
}

/// CSV with columns `t,x,y,alpha,is_jump`. `alpha` is the index of the
/// driving patch; `is_jump` is 1 on the first sample after a discontinuity.
/// A sample repeating the previous one is skipped.
pub fn trajectory_csv(f: &PatchyField, y: &Trajectory) -> String {
    let mut out = String::from("t,x,y,alpha,is_jump\n");
    let mut prev: Option<Sample> = None;
    let mut row = |s: Sample, region: usize, jump: bool, prev: &mut Option<Sample>| {
        if !jump && prev.is_some_and(|p| p.t == s.t && p.x == s.x) {
            return;
        }
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{},{}\n", s.t, s.x.x, s.x.y, f.id(region), u8::from(jump)));
        *prev = Some(s);
    };
    let first = y.pieces.first().map_or(0, |p| p.region);
    let origin_region = f.alpha_star(y.origin.x).unwrap_or(first);
    row(y.origin, origin_region, false, &mut prev);
    for p in &y.pieces {
        let jump = prev.is_some_and(|q| q.x.dist(p.start()) > JOIN_TOL);
        for (k, s) in p.samples.iter().enumerate() {
            row(*s, p.region, jump && k == 0, &mut prev);
        }
    }
    out
}

/// True when the active patch never decreases along the samples, except
/// across the recorded jump marks.
pub fn alpha_star_monotone(f: &PatchyField, y: &Trajectory) -> bool {
    let mut prev: Option<usize> = None;
    let mut last: Option<Point> = None;
    for p in &y.pieces {
        let t = p.t0();
        let marked = y.jump_marks.iter().any(|j| (j.t - t).abs() <= 1e-12 * (1.0 + t.abs()));
        if marked && last.is_some_and(|q| q.dist(p.start()) > JOIN_TOL) {
            prev = None;
        }
        for s in &p.samples {
            let Some(a) = f.alpha_star(s.x) else {
                return false;
            };
            if prev.is_some_and(|b| a < b) {
                return false;
            }
            prev = Some(a);
        }
        last = Some(p.end());
    }
    true
}
