//! Construction of an unperturbed solution that stays uniformly close to a
//! perturbed one: monotone repair, per-region re-anchoring, concatenation
//! of classical solutions and jump-by-jump glueing. An independent
//! brute-force search gives a reference distance.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::field::{PatchId, PatchyField};
use crate::integrate::{sup_distance, SolveError, SolverOpts, Trajectory};
use crate::perturbation::BvPath;

mod context;
mod glue;
mod oracle;
mod pipeline;
mod tube;

pub use context::{component_edge_distance, BoundaryComponents, FittedConstants, ShadowContext};
pub use glue::{absorb_jumps, glue_single_jump, GlueCase, Glued};
pub use oracle::{nearest_solution_oracle, OracleGrid, OracleResult};
pub use pipeline::{build_ccs, monotonize, replace_in_domain, to_piecewise, DomainCase};
pub use tube::{tubes_disjoint, Tube};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Monotonize,
    ToPiecewise,
    ReplaceInDomain,
    BuildCcs,
    Glue,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Monotonize => "monotonize",
            Stage::ToPiecewise => "to_piecewise",
            Stage::ReplaceInDomain => "replace_in_domain",
            Stage::BuildCcs => "build_ccs",
            Stage::Glue => "glue",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShadowError {
    #[error("total variation {tv} is not below the scenario threshold {delta}")]
    AboveThreshold { tv: f64, delta: f64 },
    #[error("{stage}: jump budget {budget} exceeds the fitted bound {bound}")]
    BudgetExceeded { stage: Stage, budget: f64, bound: f64 },
    #[error("{stage}: {source}")]
    Solve {
        stage: Stage,
        #[source]
        source: SolveError,
    },
    #[error("replace_in_domain: a jump in region {region} meets two tubes of vertex trajectories")]
    TubeAmbiguity { region: PatchId },
    #[error("replace_in_domain: jump of size {size} at t = {t} in region {region} lies outside every vertex-trajectory tube")]
    JumpOutsideTubes { region: PatchId, t: f64, size: f64 },
    #[error("glue: gap {gap} between regions {from} and {to} is neither inside one boundary component nor near a gate")]
    GateSeparationViolated { from: PatchId, to: PatchId, gap: f64 },
    #[error("{stage}: the active patch decreases at t = {t}")]
    NotMonotone { stage: Stage, t: f64 },
}

impl ShadowError {
    pub(crate) fn solve(stage: Stage) -> impl FnOnce(SolveError) -> ShadowError {
        move |source| ShadowError::Solve { stage, source }
    }
}

/// One line of the diagnostics table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Jump budget of the stage input (the total variation for the first stage).
    pub budget_in: f64,
    pub budget_out: f64,
    /// Ratio of the output budget to the input total variation.
    pub constant: f64,
    /// Net change of the switching schedule introduced by the stage.
    pub time_shift: f64,
}

#[derive(Clone, Debug)]
pub struct ShadowResult {
    /// Unperturbed solution.
    pub x: Trajectory,
    pub sup_distance: f64,
    pub stagelog: Vec<StageRecord>,
    pub constants: FittedConstants,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{error}")]
pub struct ShadowFailure {
    #[source]
    pub error: ShadowError,
    pub stagelog: Vec<StageRecord>,
}

/// Diagnostics CSV with columns `stage,budget_in,budget_out,constant,time_shift`.
pub fn diagnostics_csv(log: &[StageRecord]) -> String {
    let mut s = String::from("stage,budget_in,budget_out,constant,time_shift\n");
    for r in log {
        s.push_str(&format!("{},{:.16e},{:.16e},{:.16e},{:.16e}\n", r.stage, r.budget_in, r.budget_out, r.constant, r.time_shift));
    }
    s
}

/// Runs the whole pipeline on a perturbed solution `y` of the system driven
/// by `w` and returns an unperturbed solution with its sup distance to `y`.
pub fn shadow(f: &PatchyField, ctx: &ShadowContext, y: &Trajectory, w: &BvPath) -> Result<ShadowResult, ShadowFailure> {
    let mut log = Vec::new();
    let fail = |error: ShadowError, log: &Vec<StageRecord>| ShadowFailure {
        error,
        stagelog: log.clone(),
    };
    let tv = w.total_variation();
    if tv >= ctx.constants.delta {
        return Err(fail(
            ShadowError::AboveThreshold {
                tv,
                delta: ctx.constants.delta,
            },
            &log,
        ));
    }
    let (t0, t1) = (y.t0(), y.t1());
    let per_tv = |b: f64| if tv > 0.0 { b / tv } else { 0.0 };
    let (ym, wm) = monotonize(f, ctx, y, w).map_err(|e| fail(e, &log))?;
    log.push(StageRecord {
        stage: Stage::Monotonize,
        budget_in: tv,
        budget_out: wm.total_variation(),
        constant: per_tv(wm.total_variation()),
        time_shift: 0.0,
    });
    let ys = to_piecewise(f, ctx, &ym, &wm).map_err(|e| fail(e, &log))?;
    log.push(StageRecord {
        stage: Stage::ToPiecewise,
        budget_in: wm.total_variation(),
        budget_out: ys.jump_budget(),
        constant: per_tv(ys.jump_budget()),
        time_shift: switch_shift(&ym, &ys),
    });
    check_budget(ctx, Stage::ToPiecewise, ys.jump_budget(), tv).map_err(|e| fail(e, &log))?;
    let yc = build_ccs(f, ctx, &ys).map_err(|e| fail(e, &log))?;
    log.push(StageRecord {
        stage: Stage::BuildCcs,
        budget_in: ys.jump_budget(),
        budget_out: yc.jump_budget(),
        constant: per_tv(yc.jump_budget()),
        time_shift: switch_shift(&ys, &yc),
    });
    check_budget(ctx, Stage::BuildCcs, yc.jump_budget(), tv).map_err(|e| fail(e, &log))?;
    let x = absorb_jumps(f, ctx, yc, tv, &mut log).map_err(|e| fail(e, &log))?;
    let d = sup_distance(&x, y, t0, t1);
    Ok(ShadowResult {
        x,
        sup_distance: d,
        stagelog: log,
        constants: ctx.constants,
    })
}

/// Solver options whose exit searches stop after `limit` time units.
pub(crate) fn capped(opts: &SolverOpts, limit: f64) -> SolverOpts {
    SolverOpts {
        max_time: limit.max(opts.h),
        ..*opts
    }
}

/// Jump sizes below this are solver round-off, not budget.
const BUDGET_SLACK: f64 = 1e-8;

pub(crate) fn check_budget(ctx: &ShadowContext, stage: Stage, budget: f64, tv: f64) -> Result<(), ShadowError> {
    let bound = ctx.budget_cap * tv;
    if budget > bound + BUDGET_SLACK {
        return Err(ShadowError::BudgetExceeded { stage, budget, bound });
    }
    Ok(())
}

/// Difference between the last switching times of two paths.
fn switch_shift(a: &Trajectory, b: &Trajectory) -> f64 {
    let last = |t: &Trajectory| {
        t.pieces
            .windows(2)
            .filter(|w| w[0].region != w[1].region)
            .map(|w| w[0].t1())
            .last()
            .unwrap_or(t.t0())
    };
    last(b) - last(a)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::field::{Patch, SmoothFieldSpec};
    use crate::geometry::{Point, Polygon};
    use crate::integrate::{certify, solve_perturbed};

    pub fn generic_demo() -> PatchyField {
        PatchyField::new(vec![
            Patch::new(
                1,
                Polygon::rect(0.0, 0.0, 4.0, 2.0).unwrap(),
                SmoothFieldSpec::affine(Point::new(1.0, 0.5), [[-0.3, 0.0], [0.0, -0.5]]),
            ),
            Patch::new(
                2,
                Polygon::rect(2.0, 0.5, 5.0, 1.5).unwrap(),
                SmoothFieldSpec::affine(Point::new(0.875, 0.5), [[-0.25, 0.0], [0.0, -0.5]]),
            ),
        ])
        .unwrap()
    }

    #[test]
    fn zero_perturbation_is_reproduced() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let ctx = ShadowContext::fit(&f, &opts);
        let y = solve_perturbed(&f, &BvPath::zero(), Point::new(0.2, 0.8), 0.0, 5.0, &opts).unwrap();
        let r = shadow(&f, &ctx, &y, &BvPath::zero()).unwrap();
        assert!(r.sup_distance < 1e-9, "{}", r.sup_distance);
    }

    #[test]
    fn demo_single_jump_is_shadowed_linearly() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let ctx = ShadowContext::fit(&f, &opts);
        let mut ratios = Vec::new();
        for tv in [1e-2, 1e-3] {
            let w = BvPath::single_jump(1.0, Point::new(0.6, 0.8) * tv);
            let y = solve_perturbed(&f, &w, Point::new(0.2, 0.8), 0.0, 5.0, &opts).unwrap();
            let r = shadow(&f, &ctx, &y, &w).unwrap();
            assert!(r.x.discontinuities(1e-9).is_empty());
            assert!(certify(&f, &r.x, opts.h).pass());
            ratios.push(r.sup_distance / tv);
        }
        assert!(ratios.iter().all(|&r| r > 0.1 && r < 10.0), "{ratios:?}");
        assert!(ratios[0] / ratios[1] < 1.5 && ratios[1] / ratios[0] < 1.5, "{ratios:?}");
    }

    #[test]
    fn large_variation_is_refused() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let ctx = ShadowContext::fit(&f, &opts);
        let w = BvPath::single_jump(1.0, Point::new(0.0, 0.4));
        let y = solve_perturbed(&f, &w, Point::new(0.2, 0.8), 0.0, 2.0, &opts).unwrap();
        let err = shadow(&f, &ctx, &y, &w).unwrap_err();
        assert!(matches!(err.error, ShadowError::AboveThreshold { .. }));
    }
}
