use super::{capped, check_budget, ShadowContext, ShadowError, Stage};
use crate::field::PatchyField;
use crate::geometry::Point;
use crate::integrate::{
    entry_time, exit_time, flow, flow_point, solve_forward, Direction, JumpMark, Piece, Sample, SolveError, SolverOpts,
    Trajectory, JOIN_TOL,
};
use crate::perturbation::BvPath;

/// Excises every stretch where the active patch of `y` falls below its
/// running maximum, replacing it by the unperturbed solution from the last
/// point before the drop, and bridges back to `y` with one added jump.
pub fn monotonize(f: &PatchyField, ctx: &ShadowContext, y: &Trajectory, w: &BvPath) -> Result<(Trajectory, BvPath), ShadowError> {
    let (t0, t1) = (y.t0(), y.t1());
    let mut cur = y.clone();
    let mut cw = w.clone();
    for _ in 0..=y.pieces.len() {
        let Some(ta) = first_backslide(&cur) else {
            return Ok((cur, cw));
        };
        let from = cur.eval(ta);
        let z = solve_forward(f, from, ta, t1, &ctx.opts).map_err(ShadowError::solve(Stage::Monotonize))?;
        let tb = cur
            .times()
            .into_iter()
            .filter(|&t| t > ta)
            .find(|&t| f.alpha_star(cur.eval_right(t)) >= f.alpha_star(z.eval(t)))
            .unwrap_or(t1);
        let bridge = cur.eval_right(tb) - z.eval(tb);
        let mut next = cur.restrict(t0, ta);
        next.append(z.restrict(ta, tb));
        if tb < t1 {
            let mut rest = cur.restrict(tb, t1);
            rest.jump_marks.retain(|j| j.t > tb);
            next.append(rest);
        }
        next.jump_marks.retain(|j| j.t < ta || j.t > tb);
        if bridge.norm() > 0.0 && tb < t1 {
            next.jump_marks.push(JumpMark {
                t: tb,
                from: z.eval(tb),
                to: cur.eval_right(tb),
            });
            next.jump_marks.sort_by(|a, b| a.t.total_cmp(&b.t));
        }
        cw = cw.excise(ta, tb, if tb < t1 { bridge } else { Point::ZERO });
        check_budget(ctx, Stage::Monotonize, cw.total_variation(), w.total_variation())?;
        cur = next;
    }
    Err(ShadowError::BudgetExceeded {
        stage: Stage::Monotonize,
        budget: cw.total_variation(),
        bound: ctx.budget_cap * w.total_variation(),
    })
}

/// Start time of the first piece whose patch is below an earlier one.
fn first_backslide(y: &Trajectory) -> Option<f64> {
    let mut top = None;
    for p in &y.pieces {
        if top.is_some_and(|m| p.region < m) {
            return Some(p.t0());
        }
        top = top.max(Some(p.region));
    }
    None
}

/// Visits of a monotone path: `(region, entry time, entry point)`.
fn visits(y: &Trajectory) -> Result<Vec<(usize, f64, Point)>, ShadowError> {
    let mut out: Vec<(usize, f64, Point)> = Vec::new();
    for p in &y.pieces {
        match out.last() {
            Some(&(r, _, _)) if p.region == r => {}
            Some(&(r, _, _)) if p.region < r => {
                return Err(ShadowError::NotMonotone {
                    stage: Stage::ToPiecewise,
                    t: p.t0(),
                })
            }
            _ => out.push((p.region, if out.is_empty() { y.t0() } else { p.t0() }, p.start())),
        }
    }
    Ok(out)
}

/// Flows the field of `region` from `x` at `t` until the region is left or
/// `t_end` is reached, then continues with the full system.
fn continue_from(f: &PatchyField, region: usize, x: Point, t: f64, t_end: f64, opts: &SolverOpts) -> Result<Trajectory, SolveError> {
    let d = match exit_time(f, region, x, Direction::Forward, &capped(opts, t_end - t)) {
        Ok(d) => d.min(t_end - t),
        Err(SolveError::HorizonExceeded { .. }) => t_end - t,
        Err(e) => return Err(e),
    };
    let mut out = Trajectory::new(Sample::new(t, x), vec![flow(f, region, x, t, d, opts)]);
    if t + d < t_end {
        let tail = solve_forward(f, out.end(), t + d, t_end, opts)?;
        out.append(tail);
    }
    Ok(out)
}

/// Replaces a monotone perturbed path by one classical solution per visited
/// region. Each solution starts from the region's entry point moved back
/// along the flow onto the region boundary, and runs until it leaves the
/// region; the last one is continued by the full system up to the horizon.
pub fn to_piecewise(f: &PatchyField, ctx: &ShadowContext, y: &Trajectory, w: &BvPath) -> Result<Trajectory, ShadowError> {
    let _ = w;
    let opts = &ctx.opts;
    let (t0, t_end) = (y.t0(), y.t1());
    let v = visits(y)?;
    let mut out = Trajectory::new(Sample::new(t0, y.start()), Vec::new());
    let mut s = t0;
    for (k, &(region, _, q)) in v.iter().enumerate() {
        let p = if k == 0 {
            q
        } else {
            match exit_time(f, region, q, Direction::Backward, &capped(opts, t_end - t0)) {
                Ok(bt) => flow_point(f, region, q, bt, opts),
                Err(_) => q,
            }
        };
        if k + 1 == v.len() {
            let tail = continue_from(f, region, p, s, t_end, opts).map_err(ShadowError::solve(Stage::ToPiecewise))?;
            out.append(tail);
            break;
        }
        let d = match exit_time(f, region, p, Direction::Forward, &capped(opts, t_end - s)) {
            Ok(d) => d,
            Err(SolveError::HorizonExceeded { .. }) => t_end - s,
            Err(_) => v[k + 1].1 - s,
        };
        let d = d.min(t_end - s);
        out.pieces.push(flow(f, region, p, s, d, opts));
        s += d;
        if s >= t_end {
            break;
        }
    }
    Ok(out.compact())
}

/// Which ends of a single-region stretch lie on the region boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainCase {
    /// Enters and leaves through the boundary.
    Through,
    /// Enters through the boundary and stays until the horizon.
    Entering,
    /// Starts inside and leaves through the boundary.
    Leaving,
    /// Starts inside and stays until the horizon.
    Whole,
}

impl DomainCase {
    fn start_on_boundary(self) -> bool {
        matches!(self, DomainCase::Through | DomainCase::Entering)
    }

    fn end_on_boundary(self) -> bool {
        matches!(self, DomainCase::Through | DomainCase::Leaving)
    }
}

/// Starting point `Q` and exit time `sigma` of one classical solution of
/// `region` that replaces the piecewise path `seg`, whose jumps stay inside
/// the region. A jump must lie in the tube of width `c14 * budget` around a
/// vertex trajectory; `Q` is the point whose flow reaches that trajectory's
/// boundary crossing at the jump time.
pub fn replace_in_domain(
    f: &PatchyField,
    ctx: &ShadowContext,
    seg: &Trajectory,
    region: usize,
    case: DomainCase,
) -> Result<(Point, f64), ShadowError> {
    let opts = &ctx.opts;
    let (tau0, tau1) = (seg.t0(), seg.t1());
    let start = seg.start();
    let jumps: Vec<JumpMark> = seg.discontinuities(JOIN_TOL).into_iter().filter(|j| j.t > tau0).collect();
    if jumps.is_empty() {
        return Ok((start, tau1));
    }
    let budget: f64 = jumps.iter().map(|j| j.from.dist(j.to)).sum();
    let first = jumps[0];
    let tubes = ctx.tubes(f, region, ctx.constants.c14 * budget);
    let hits: Vec<_> = tubes
        .iter()
        .filter(|t| t.contains(f, first.from) || t.contains(f, first.to))
        .collect();
    let Some(tube) = hits.first() else {
        return Err(ShadowError::JumpOutsideTubes {
            region: f.id(region),
            t: first.t,
            size: first.from.dist(first.to),
        });
    };
    if hits.iter().any(|t| t.gamma.path.start().dist(tube.gamma.path.start()) > 1e-9) {
        return Err(ShadowError::TubeAmbiguity { region: f.id(region) });
    }
    let gamma = &tube.gamma;
    let gate = gamma
        .crossings
        .iter()
        .map(|&th| gamma.path.eval(th))
        .min_by(|a, b| a.dist(first.from).total_cmp(&b.dist(first.from)))
        .unwrap_or(gamma.vertex);
    let q_raw = flow_point(f, region, gate, -(first.t - tau0), opts);
    let q = if case.start_on_boundary() {
        project_to_boundary(f, region, q_raw, first.t - tau0 + 1.0, opts)
    } else {
        q_raw
    };
    let exit = exit_time(f, region, q, Direction::Forward, &capped(opts, 2.0 * (tau1 - tau0) + 1.0)).ok();
    let sigma = match (case.end_on_boundary(), exit) {
        (true, Some(e)) => tau0 + e,
        (false, Some(e)) => tau0 + e.min(tau1 - tau0),
        (_, None) => tau1,
    };
    Ok((q, sigma))
}

/// Moves `p` along the flow of `region` onto the boundary of the region:
/// backward when inside, forward when outside.
fn project_to_boundary(f: &PatchyField, region: usize, p: Point, limit: f64, opts: &SolverOpts) -> Point {
    if f.in_region_closure(region, p) {
        match exit_time(f, region, p, Direction::Backward, &capped(opts, limit)) {
            Ok(t) => flow_point(f, region, p, t, opts),
            Err(_) => p,
        }
    } else {
        match entry_time(f, region, p, Direction::Forward, limit, opts) {
            Some(t) => flow_point(f, region, p, t, opts),
            None => p,
        }
    }
}

/// Concatenation of classical solutions: each region stretch of `ys` is
/// replaced by the flow from its `Q` for `sigma - tau'` time units, and the
/// stretches are laid end to end.
pub fn build_ccs(f: &PatchyField, ctx: &ShadowContext, ys: &Trajectory) -> Result<Trajectory, ShadowError> {
    let opts = &ctx.opts;
    let (t0, t_end) = (ys.t0(), ys.t1());
    let mut groups: Vec<Vec<Piece>> = Vec::new();
    for p in &ys.pieces {
        match groups.last_mut() {
            Some(g) if g[0].region == p.region => g.push(p.clone()),
            Some(g) if p.region < g[0].region => {
                return Err(ShadowError::NotMonotone {
                    stage: Stage::BuildCcs,
                    t: p.t0(),
                })
            }
            _ => groups.push(vec![p.clone()]),
        }
    }
    let m = groups.len();
    let mut out = Trajectory::new(Sample::new(t0, ys.start()), Vec::new());
    let mut tau = t0;
    for (k, g) in groups.into_iter().enumerate() {
        let region = g[0].region;
        let tk = if k == 0 { t0 } else { g[0].t0() };
        let seg = Trajectory::new(Sample::new(tk, g[0].start()), g);
        let case = match (k == 0, k + 1 == m) {
            (true, true) => DomainCase::Whole,
            (true, false) => DomainCase::Leaving,
            (false, true) => DomainCase::Entering,
            (false, false) => DomainCase::Through,
        };
        let (q, sigma) = replace_in_domain(f, ctx, &seg, region, case)?;
        if k + 1 == m {
            let tail = continue_from(f, region, q, tau, t_end, opts).map_err(ShadowError::solve(Stage::BuildCcs))?;
            out.append(tail);
            break;
        }
        let d = (sigma - tk).min(t_end - tau);
        out.pieces.push(flow(f, region, q, tau, d, opts));
        tau += d;
        if tau >= t_end {
            break;
        }
    }
    if let Some(p) = out.pieces.first() {
        out.origin = Sample::new(t0, p.start());
    }
    Ok(out.compact())
}
