use super::{capped, check_budget, ShadowContext, ShadowError, Stage, StageRecord};
use crate::field::PatchyField;
use crate::geometry::Point;
use crate::integrate::{exit_time, flow, solve_backward, solve_forward, Direction, SolverOpts, Trajectory, JOIN_TOL, VERTEX_HIT_TOL};

/// How a jump between two classical solutions was removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GlueCase {
    /// The two solutions already meet.
    Continuous,
    /// Both ends lie on one boundary component; the lower solution is
    /// continued by the upper field.
    SameComponent,
    /// The ends are near a gate on a vertex trajectory; the solution is
    /// routed through the gate and follows that trajectory.
    VertexGate,
    /// The ends are near a gate off every vertex trajectory.
    PlainGate,
}

#[derive(Clone, Debug)]
pub struct Glued {
    /// Classical solution on `[yflat.t0, sigma]`, capped at the horizon.
    pub phi: Trajectory,
    /// Time at which `phi` reaches the end of the upper solution's stretch.
    pub sigma: f64,
    pub case: GlueCase,
}

fn exit_within(f: &PatchyField, region: usize, x: Point, limit: f64, opts: &SolverOpts) -> Option<f64> {
    exit_time(f, region, x, Direction::Forward, &capped(opts, limit)).ok()
}

/// Replaces the classical solution `yflat`, which ends with a jump onto the
/// start of the classical solution `ynat`, by one classical solution.
pub fn glue_single_jump(
    f: &PatchyField,
    ctx: &ShadowContext,
    yflat: &Trajectory,
    ynat: &Trajectory,
    horizon: f64,
) -> Result<Glued, ShadowError> {
    let opts = &ctx.opts;
    let (t0, tau1, tau2) = (yflat.t0(), yflat.t1(), ynat.t1());
    let (xflat, xnat) = (yflat.end(), ynat.start());
    let gap = xflat.dist(xnat);
    let b = ynat.pieces.first().map_or_else(|| f.alpha_star(xnat).unwrap_or(0), |p| p.region);
    let a = yflat.end_region().unwrap_or(b);
    if gap <= JOIN_TOL {
        let mut phi = yflat.clone();
        phi.append(ynat.clone());
        return Ok(Glued {
            phi,
            sigma: tau2,
            case: GlueCase::Continuous,
        });
    }
    let room = horizon - tau1;
    let (lo, hi) = (a.min(b), a.max(b));
    let r = ctx.constants.c3 * gap;
    let comps = ctx.boundary_components(f, lo, hi, r);
    if let (Some(ca), Some(cb)) = (comps.component_of(xflat), comps.component_of(xnat)) {
        if ca == cb {
            let t_plus = exit_within(f, b, xflat, room, opts).unwrap_or(room);
            let mut phi = yflat.clone();
            phi.append(Trajectory::new(yflat.origin, vec![flow(f, b, xflat, tau1, t_plus.min(room), opts)]));
            return Ok(Glued {
                phi,
                sigma: tau1 + t_plus,
                case: GlueCase::SameComponent,
            });
        }
    }
    let gate = ctx
        .gates_between(lo, hi)
        .iter()
        .copied()
        .map(|g| (g, g.dist(xflat).min(g.dist(xnat))))
        .filter(|&(_, d)| d <= r)
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(g, _)| g);
    let Some(x0) = gate else {
        return Err(ShadowError::GateSeparationViolated {
            from: f.id(a),
            to: f.id(b),
            gap,
        });
    };
    let mut phi = solve_backward(f, x0, tau1, t0, opts).map_err(ShadowError::solve(Stage::Glue))?;
    let t_plus = exit_within(f, b, x0, room, opts);
    let on_gamma = ctx.vertex_trajectories[b]
        .iter()
        .map(|g| (g, g.closest(x0)))
        .find(|(_, (_, d))| *d <= VERTEX_HIT_TOL);
    let (d, case) = match on_gamma {
        Some((g, (tx, _))) => {
            let want = tau2 - tau1;
            let d = g
                .crossings
                .iter()
                .map(|&c| c - tx)
                .filter(|&c| c > 1e-12)
                .min_by(|x, y| (x - want).abs().total_cmp(&(y - want).abs()))
                .or(t_plus)
                .unwrap_or(room);
            (d, GlueCase::VertexGate)
        }
        None => (t_plus.unwrap_or(room), GlueCase::PlainGate),
    };
    phi.append(Trajectory::new(phi.origin, vec![flow(f, b, x0, tau1, d.min(room), opts)]));
    Ok(Glued {
        phi: phi.compact(),
        sigma: tau1 + d,
        case,
    })
}

/// Removes the jumps of a concatenation of classical solutions one at a
/// time, shifting the remainder to the glued solution's clock.
pub fn absorb_jumps(
    f: &PatchyField,
    ctx: &ShadowContext,
    ccs: Trajectory,
    tv: f64,
    log: &mut Vec<StageRecord>,
) -> Result<Trajectory, ShadowError> {
    let (t0, horizon) = (ccs.t0(), ccs.t1());
    let mut cur = ccs;
    let cap = cur.discontinuities(JOIN_TOL).len() + 1;
    for _ in 0..=cap {
        let jumps: Vec<_> = cur.discontinuities(JOIN_TOL).into_iter().filter(|j| j.t > t0 && j.t < horizon).collect();
        let Some(first) = jumps.first() else {
            return Ok(cur);
        };
        let tau1 = first.t;
        let tau2 = jumps.get(1).map_or(horizon, |j| j.t);
        let yflat = cur.restrict(t0, tau1);
        let nat: Vec<_> = cur.pieces.iter().filter(|p| p.t0() >= tau1 && p.t1() <= tau2).cloned().collect();
        let rest: Vec<_> = cur.pieces.iter().filter(|p| p.t0() >= tau2 && tau2 < horizon).cloned().collect();
        let Some(head) = nat.first() else {
            return Ok(cur);
        };
        let ynat = Trajectory::new(crate::integrate::Sample::new(tau1, head.start()), nat);
        let glued = glue_single_jump(f, ctx, &yflat, &ynat, horizon)?;
        let shift = glued.sigma - tau2;
        let mut next = glued.phi.restrict(t0, horizon);
        if let Some(r0) = rest.first() {
            if glued.sigma < horizon {
                let tail = Trajectory::new(crate::integrate::Sample::new(tau2, r0.start()), rest)
                    .time_shifted(shift)
                    .restrict(glued.sigma, horizon);
                next.append(tail);
            }
        }
        if next.t1() < horizon {
            let fill = solve_forward(f, next.end(), next.t1(), horizon, &ctx.opts).map_err(ShadowError::solve(Stage::Glue))?;
            next.append(fill);
        }
        let next = next.compact();
        log.push(StageRecord {
            stage: Stage::Glue,
            budget_in: cur.jump_budget(),
            budget_out: next.jump_budget(),
            constant: if tv > 0.0 { next.jump_budget() / tv } else { 0.0 },
            time_shift: shift,
        });
        check_budget(ctx, Stage::Glue, next.jump_budget(), tv)?;
        cur = next;
    }
    Err(ShadowError::BudgetExceeded {
        stage: Stage::Glue,
        budget: cur.jump_budget(),
        bound: ctx.budget_cap * tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::Sample;
    use crate::shadow::tests::generic_demo;

    fn upper(f: &PatchyField, ctx: &ShadowContext, x: Point, t: f64, d: f64) -> Trajectory {
        Trajectory::new(Sample::new(t, x), vec![flow(f, 1, x, t, d, &ctx.opts)])
    }

    #[test]
    fn same_component_continues_lower_solution() {
        let f = generic_demo();
        let ctx = ShadowContext::fit(&f, &SolverOpts::default());
        let yflat = solve_backward(&f, Point::new(2.0, 1.0), 1.0, 0.0, &ctx.opts).unwrap();
        let ynat = upper(&f, &ctx, Point::new(2.0, 1.01), 1.0, 2.0);
        let g = glue_single_jump(&f, &ctx, &yflat, &ynat, 3.0).unwrap();
        assert_eq!(g.case, GlueCase::SameComponent);
        assert!(g.phi.discontinuities(JOIN_TOL).is_empty());
        // the upper field has an attracting rest point inside its region
        assert!((g.sigma - 3.0).abs() < 1e-12);
        assert!((g.phi.t1() - 3.0).abs() < 1e-12);
        assert!(g.phi.eval(1.0).dist(Point::new(2.0, 1.0)) < 1e-12);
    }

    #[test]
    fn jump_across_a_gate_goes_through_it() {
        let f = generic_demo();
        let ctx = ShadowContext::fit(&f, &SolverOpts::default());
        let yflat = solve_backward(&f, Point::new(2.0, 0.52), 1.0, 0.0, &ctx.opts).unwrap();
        let ynat = upper(&f, &ctx, Point::new(2.02, 0.5), 1.0, 1.0);
        let g = glue_single_jump(&f, &ctx, &yflat, &ynat, 2.0).unwrap();
        assert!(matches!(g.case, GlueCase::VertexGate | GlueCase::PlainGate), "{:?}", g.case);
        assert!(g.phi.discontinuities(JOIN_TOL).is_empty());
        assert!(g.phi.eval(1.0).dist(Point::new(2.0, 0.5)) < 1e-9);
    }

    #[test]
    fn far_jump_without_gate_is_reported() {
        let f = generic_demo();
        let mut ctx = ShadowContext::fit(&f, &SolverOpts::default());
        // a ball factor too small to reach the gate from either end
        ctx.constants.c3 = 0.5;
        let yflat = solve_backward(&f, Point::new(2.0, 0.7), 1.0, 0.0, &ctx.opts).unwrap();
        let ynat = upper(&f, &ctx, Point::new(2.3, 0.5), 1.0, 1.0);
        let err = glue_single_jump(&f, &ctx, &yflat, &ynat, 2.0).unwrap_err();
        assert!(matches!(err, ShadowError::GateSeparationViolated { .. }), "{err:?}");
    }

    #[test]
    fn absorbing_keeps_the_horizon() {
        let f = generic_demo();
        let ctx = ShadowContext::fit(&f, &SolverOpts::default());
        let mut ccs = solve_backward(&f, Point::new(2.0, 1.0), 1.0, 0.0, &ctx.opts).unwrap();
        ccs.append(upper(&f, &ctx, Point::new(2.0, 1.001), 1.0, 2.0));
        let mut log = Vec::new();
        let x = absorb_jumps(&f, &ctx, ccs, 1e-3, &mut log).unwrap();
        assert!(x.discontinuities(JOIN_TOL).is_empty());
        assert!((x.t1() - 3.0).abs() < 1e-12);
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].budget_out, 0.0);
    }
}
