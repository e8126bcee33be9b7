//! Empirical stability rates: total-variation sweeps with log-log fits, the
//! Lipschitz baseline for smooth fields and the tangential example whose
//! rate degenerates to a fractional power.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Patch, PatchyField, SmoothFieldSpec};
use crate::geometry::{Point, Polygon};
use crate::integrate::{solve_forward, solve_perturbed, sup_distance, SolveError, SolverOpts};
use crate::perturbation::{BvPath, PerturbationError};
use crate::shadow::{nearest_solution_oracle, shadow, OracleGrid, ShadowContext};

mod example14;

pub use example14::{example_1_4_distance, example_1_4_paths, example_1_4_sweep, Example14, Example14Paths, Example14Row, Example14Table, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("a sweep needs at least 4 total variations, got {0}")]
    TooFewValues(usize),
    #[error("total variations must span at least two decades, got {0:.3}")]
    NarrowSpan(f64),
    #[error("total variation must be positive and finite, got {0}")]
    NonPositiveTv(f64),
    #[error("total variation {tv} is not below the scenario threshold {delta}")]
    AboveThreshold { tv: f64, delta: f64 },
    #[error("fit needs at least 3 successful rows, got {0}")]
    TooFewRows(usize),
    #[error("fit needs positive distances, got {0}")]
    NonPositiveDistance(f64),
    #[error("curve exponents must be finite and above 1, got alpha = {alpha}, beta = {beta}")]
    BadExponents { alpha: f64, beta: f64 },
    #[error("eps = {0} violates the tangency layout of the tangential example")]
    ScenarioOutOfRange(f64),
    #[error(transparent)]
    Perturbation(#[from] PerturbationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Shadow,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Shadow => "shadow",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shadow" => Ok(Method::Shadow),
            "oracle" => Ok(Method::Oracle),
            other => Err(format!("unknown method `{other}`, expected shadow or oracle")),
        }
    }
}

/// Least-squares fit of `log(distance) = exponent * log(tv) + log(constant)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_squared: f64,
}

impl PowerFit {
    /// One-line `key=value` summary.
    pub fn summary(&self, rows: usize) -> String {
        format!(
            "exponent={:.6} constant={:.6e} r_squared={:.6} rows={rows}",
            self.exponent, self.constant, self.r_squared
        )
    }
}

/// Ordinary least squares on the log-log data, all points weighted equally.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit, RateError> {
    if points.len() < 3 {
        return Err(RateError::TooFewRows(points.len()));
    }
    for &(x, y) in points {
        if !(x > 0.0 && x.is_finite()) {
            return Err(RateError::NonPositiveTv(x));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(RateError::NonPositiveDistance(y));
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let b = my - exponent * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - exponent * x - b).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerFit {
        exponent,
        constant: b.exp(),
        r_squared,
    })
}

/// `count` log-spaced values from `start` to `end`, in the given order.
pub fn log_spaced(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), end.ln());
            (0..count)
                .map(|k| {
                    if k == 0 {
                        start
                    } else if k + 1 == count {
                        end
                    } else {
                        (a + (b - a) * k as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// A one-parameter family of perturbations: `shape` rescaled to the
/// requested total variation, applied to the solution from `x0`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpFamily {
    pub x0: Point,
    pub t0: f64,
    pub t1: f64,
    pub shape: BvPath,
}

impl JumpFamily {
    pub fn member(&self, tv: f64) -> Result<BvPath, RateError> {
        Ok(self.shape.with_total_variation(tv)?)
    }
}

/// Oracle grid proportional to the total variation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleScale {
    pub radius_per_tv: f64,
    pub n: usize,
}

impl Default for OracleScale {
    fn default() -> Self {
        OracleScale { radius_per_tv: 4.0, n: 12 }
    }
}

impl OracleScale {
    pub fn grid(&self, tv: f64) -> OracleGrid {
        OracleGrid {
            radius: self.radius_per_tv * tv,
            n: self.n,
            vertex_seeds: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub tv: f64,
    pub distance: f64,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowFailure {
    pub tv: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateTable {
    /// Successful rows by decreasing total variation.
    pub rows: Vec<RateRow>,
    pub failures: Vec<RowFailure>,
    pub fit: PowerFit,
}

impl RateTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tv,distance,method\n");
        for r in &self.rows {
            s.push_str(&format!("{:.16e},{:.16e},{}\n", r.tv, r.distance, r.method));
        }
        s
    }

    pub fn summary(&self) -> String {
        self.fit.summary(self.rows.len())
    }

    /// Largest over smallest `distance / tv` ratio.
    pub fn ratio_spread(&self) -> f64 {
        let ratios = self.rows.iter().map(|r| r.distance / r.tv);
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
        hi / lo
    }
}

/// Checks the sweep preconditions and returns the values sorted decreasing.
pub fn check_sweep(tvs: &[f64], delta: f64) -> Result<Vec<f64>, RateError> {
    if tvs.len() < 4 {
        return Err(RateError::TooFewValues(tvs.len()));
    }
    if let Some(&bad) = tvs.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(RateError::NonPositiveTv(bad));
    }
    if let Some(&tv) = tvs.iter().find(|t| **t >= delta) {
        return Err(RateError::AboveThreshold { tv, delta });
    }
    let mut sorted = tvs.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let span = (sorted[0] / sorted[sorted.len() - 1]).log10();
    if span < 2.0 - 1e-9 {
        return Err(RateError::NarrowSpan(span));
    }
    Ok(sorted)
}

/// Distance from the perturbed solution of one family member to the
/// unperturbed solutions, by the chosen method.
pub fn sweep_row(f: &PatchyField, ctx: &ShadowContext, family: &JumpFamily, tv: f64, method: Method, scale: OracleScale) -> Result<f64, String> {
    let w = family.member(tv).map_err(|e| e.to_string())?;
    let y = solve_perturbed(f, &w, family.x0, family.t0, family.t1, &ctx.opts).map_err(|e| format!("perturbed solve: {e}"))?;
    match method {
        Method::Shadow => shadow(f, ctx, &y, &w).map(|r| r.sup_distance).map_err(|e| e.to_string()),
        Method::Oracle => nearest_solution_oracle(f, &y, &scale.grid(tv), &ctx.opts)
            .map(|r| r.distance)
            .ok_or_else(|| "oracle: no seed produced a solution".to_string()),
    }
}

/// Measures the distance for each total variation and fits the rate. Rows
/// run in parallel and are merged by decreasing total variation.
pub fn rate_sweep(
    f: &PatchyField,
    ctx: &ShadowContext,
    family: &JumpFamily,
    tvs: &[f64],
    method: Method,
    scale: OracleScale,
) -> Result<RateTable, RateError> {
    let tvs = check_sweep(tvs, ctx.constants.delta)?;
    let results: Vec<(f64, Result<f64, String>)> = tvs
        .par_iter()
        .map(|&tv| (tv, sweep_row(f, ctx, family, tv, method, scale)))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (tv, r) in results {
        match r {
            Ok(distance) if distance > 0.0 => rows.push(RateRow { tv, distance, method }),
            Ok(distance) => failures.push(RowFailure {
                tv,
                message: format!("distance {distance} is not positive"),
            }),
            Err(message) => failures.push(RowFailure { tv, message }),
        }
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.tv, r.distance)).collect();
    let fit = fit_power_law(&points)?;
    Ok(RateTable { rows, failures, fit })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzCheck {
    pub measured: f64,
    pub bound: f64,
}

impl LipschitzCheck {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.measured <= self.bound * (1.0 + rel_tol)
    }
}

/// Half side of the box standing in for the whole plane.
const PLANE: f64 = 1e6;

/// Sup distance between the perturbed and unperturbed solutions of a single
/// smooth field from `x0` over `[0, horizon]`, with the Gronwall bound
/// `exp(l * horizon) * TV(w)`.
pub fn lipschitz_bound_check(
    l: f64,
    field: &SmoothFieldSpec,
    w: &BvPath,
    x0: Point,
    horizon: f64,
    opts: &SolverOpts,
) -> Result<LipschitzCheck, RateError> {
    let plane = Polygon::rect(x0.x - PLANE, x0.y - PLANE, x0.x + PLANE, x0.y + PLANE).expect("non-degenerate box");
    let f = PatchyField::new(vec![Patch::new(0, plane, field.clone())]).expect("one patch");
    let x = solve_forward(&f, x0, 0.0, horizon, opts)?;
    let y = solve_perturbed(&f, w, x0, 0.0, horizon, opts)?;
    Ok(LipschitzCheck {
        measured: sup_distance(&y, &x, 0.0, horizon),
        bound: (l * horizon).exp() * w.total_variation(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::Jump;
    use crate::shadow::tests::generic_demo;

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|&t| (t, 3.0 * f64::powf(t, 0.25))).collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.exponent - 0.25).abs() < 1e-12);
        assert!((fit.constant - 3.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit_power_law(&pts[..2]), Err(RateError::TooFewRows(2)));
        assert!(matches!(fit_power_law(&[(1.0, 1.0), (0.1, 0.0), (0.01, 1.0)]), Err(RateError::NonPositiveDistance(_))));
    }

    #[test]
    fn log_spacing_keeps_order_and_ends() {
        let v = log_spaced(1e-2, 1e-4, 5);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 1e-2);
        assert_eq!(v[4], 1e-4);
        assert!((v[2] - 1e-3).abs() < 1e-15);
        let up = log_spaced(1e-4, 1e-2, 3);
        assert!(up[0] < up[1] && up[1] < up[2]);
    }

    #[test]
    fn sweep_preconditions() {
        assert_eq!(check_sweep(&[1e-2, 1e-3, 1e-4], 1.0), Err(RateError::TooFewValues(3)));
        assert!(matches!(check_sweep(&[1e-2, 5e-3, 2e-3, 1e-3], 1.0), Err(RateError::NarrowSpan(_))));
        assert_eq!(check_sweep(&[1e-2, 1e-3, 0.0, 1e-4], 1.0), Err(RateError::NonPositiveTv(0.0)));
        assert!(matches!(check_sweep(&[1e-1, 1e-2, 1e-3, 1e-4], 0.05), Err(RateError::AboveThreshold { .. })));
        assert_eq!(check_sweep(&[1e-4, 1e-2, 1e-3, 3e-3], 1.0).unwrap(), vec![1e-2, 3e-3, 1e-3, 1e-4]);
    }

    #[test]
    fn constant_field_distance_equals_variation() {
        // one patch, constant field: every solution is a translate, so the
        // closest one is off by exactly the jump
        let f = PatchyField::new(vec![Patch::new(
            0,
            Polygon::rect(-1.0, -1.0, 10.0, 10.0).unwrap(),
            SmoothFieldSpec::constant(Point::new(1.0, 0.0)),
        )])
        .unwrap();
        let opts = SolverOpts::default();
        let ctx = ShadowContext::fit(&f, &opts);
        let family = JumpFamily {
            x0: Point::new(0.0, 0.5),
            t0: 0.0,
            t1: 2.0,
            shape: BvPath::single_jump(1.0, Point::new(0.0, 1.0)),
        };
        let table = rate_sweep(&f, &ctx, &family, &[1e-2, 1e-3, 1e-4, 1e-5], Method::Shadow, OracleScale::default()).unwrap();
        for r in &table.rows {
            assert!((r.distance - r.tv).abs() < 1e-13, "{r:?}");
        }
        assert!((table.fit.exponent - 1.0).abs() < 1e-9);
        assert!((table.fit.constant - 1.0).abs() < 1e-8);
    }

    #[test]
    fn csv_and_summary_format() {
        let t = RateTable {
            rows: vec![RateRow {
                tv: 0.01,
                distance: 0.02,
                method: Method::Oracle,
            }],
            failures: vec![],
            fit: PowerFit {
                exponent: 1.0,
                constant: 2.0,
                r_squared: 1.0,
            },
        };
        assert_eq!(t.to_csv(), "tv,distance,method\n1.0000000000000000e-2,2.0000000000000000e-2,oracle\n");
        assert_eq!(t.summary(), "exponent=1.000000 constant=2.000000e0 r_squared=1.000000 rows=1");
    }

    #[test]
    fn gronwall_examples() {
        let opts = SolverOpts::default();
        let x0 = Point::new(0.3, -0.2);
        let jump = |m: f64| BvPath::new(vec![Jump { t: 0.0, d: Point::new(m, 0.0) }], vec![]).unwrap();
        let c = lipschitz_bound_check(0.0, &SmoothFieldSpec::constant(Point::new(1.0, 0.5)), &BvPath::single_jump(0.5, Point::new(0.0, 0.2)), x0, 1.0, &opts).unwrap();
        assert!((c.measured - 0.2).abs() < 1e-12 && (c.bound - 0.2).abs() < 1e-15);
        let c = lipschitz_bound_check(1.0, &SmoothFieldSpec::affine(Point::ZERO, [[1.0, 0.0], [0.0, 1.0]]), &jump(0.1), x0, 1.0, &opts).unwrap();
        assert!((c.measured - 0.1 * std::f64::consts::E).abs() < 1e-10, "{c:?}");
        assert!(c.holds(1e-6));
        let c = lipschitz_bound_check(1.0, &SmoothFieldSpec::affine(Point::ZERO, [[0.0, -1.0], [1.0, 0.0]]), &jump(0.1), x0, 1.0, &opts).unwrap();
        assert!((c.measured - 0.1).abs() < 1e-10, "{c:?}");
        assert!(c.holds(0.0));
    }

    #[test]
    fn demo_sweep_is_linear() {
        let f = generic_demo();
        let opts = SolverOpts::default();
        let ctx = ShadowContext::fit(&f, &opts);
        let family = JumpFamily {
            x0: Point::new(0.2, 0.8),
            t0: 0.0,
            t1: 5.0,
            shape: BvPath::single_jump(1.0, Point::new(0.6, 0.8)),
        };
        let table = rate_sweep(&f, &ctx, &family, &[1e-2, 1e-3, 1e-4, 1e-5], Method::Shadow, OracleScale::default()).unwrap();
        assert!(table.failures.is_empty(), "{:?}", table.failures);
        assert!((table.fit.exponent - 1.0).abs() < 0.1, "{:?}", table.fit);
        assert!(table.ratio_spread() < 3.0);
    }
}
