use serde::{Deserialize, Serialize};

use super::{line_through, FieldError, PatchId, PatchyField};
use crate::geometry::{Point, Polygon, TOL_GEO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Inward,
    Transversal,
    Nonzero,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Inward => "inward",
            Check::Transversal => "transversal",
            Check::Nonzero => "nonzero",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub check: Check,
    pub patch: PatchId,
    /// Higher patch whose edge line is involved, for transversality.
    pub other: Option<PatchId>,
    pub at: Point,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub check: Check,
    /// Smallest sampled margin (inner product, transversal component or norm).
    pub margin: f64,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn new(check: Check) -> Self {
        ValidationReport {
            check,
            margin: f64::INFINITY,
            samples: 0,
            violations: Vec::new(),
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn record(&mut self, value: f64, ok: bool, violation: impl FnOnce() -> Violation) {
        self.samples += 1;
        self.margin = self.margin.min(value);
        if !ok {
            self.violations.push(violation());
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationConfig {
    pub n_bnd: usize,
    pub tol_tr: f64,
    pub margin: f64,
    pub grid: usize,
    pub window: Option<Polygon>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            n_bnd: 64,
            tol_tr: 1e-6,
            margin: 1e-3,
            grid: 65,
            window: None,
        }
    }
}

/// Checks that every smooth field points strictly into its own domain.
pub fn validate_inward(f: &PatchyField, n_bnd: usize) -> ValidationReport {
    let mut rep = ValidationReport::new(Check::Inward);
    for (i, patch) in f.patches().iter().enumerate() {
        let poly = &patch.domain;
        let edges = poly.edges();
        for e in &edges {
            for k in 1..=n_bnd {
                let p = e.seg.at(k as f64 / (n_bnd + 1) as f64);
                let m = -f.eval_in(i, p).dot(e.outward);
                rep.record(m, m > 0.0, || Violation {
                    check: Check::Inward,
                    patch: patch.id,
                    other: None,
                    at: p,
                    value: m,
                });
            }
        }
        let n = poly.len();
        for (k, &v) in poly.vertices().iter().enumerate() {
            let g = f.eval_in(i, v);
            let before = -g.dot(edges[(k + n - 1) % n].outward);
            let after = -g.dot(edges[k].outward);
            let m = if poly.is_convex_vertex(k) { before.min(after) } else { before.max(after) };
            rep.record(m, m > 0.0, || Violation {
                check: Check::Inward,
                patch: patch.id,
                other: None,
                at: v,
                value: m,
            });
        }
    }
    rep
}

/// For every lower patch and every edge line of a higher patch, the lower
/// field must cross that line wherever the line meets the lower effective
/// region.
pub fn validate_transversal(f: &PatchyField, tol_tr: f64, n_bnd: usize) -> ValidationReport {
    let mut rep = ValidationReport::new(Check::Transversal);
    for lo in 0..f.len() {
        let region = f.region(lo);
        if region.is_empty() {
            continue;
        }
        let (blo, bhi) = region.base().bbox();
        for hi in lo + 1..f.len() {
            for e in f.patch(hi).domain.edges() {
                let line = line_through(&e.seg, blo, bhi);
                let normal = e.outward;
                let mut points: Vec<Point> = Vec::new();
                for piece in region.clip_segment(&line) {
                    for k in 0..=n_bnd + 1 {
                        points.push(piece.at(k as f64 / (n_bnd + 1) as f64));
                    }
                }
                for &v in region.vertices() {
                    if line.dist_to(v) <= TOL_GEO {
                        points.push(v);
                    }
                }
                for p in points {
                    let m = f.eval_in(lo, p).dot(normal).abs();
                    rep.record(m, m >= tol_tr, || Violation {
                        check: Check::Transversal,
                        patch: f.id(lo),
                        other: Some(f.id(hi)),
                        at: p,
                        value: m,
                    });
                }
            }
        }
    }
    rep
}

/// Grid check of `|g| >= margin` over each effective region, optionally
/// restricted to a window.
pub fn validate_nonzero(f: &PatchyField, margin: f64, grid: usize, window: Option<&Polygon>) -> Result<ValidationReport, FieldError> {
    if margin.is_nan() || margin <= 0.0 {
        return Err(FieldError::NonPositiveMargin(margin));
    }
    let grid = grid.max(2);
    let mut rep = ValidationReport::new(Check::Nonzero);
    for i in 0..f.len() {
        let region = f.region(i);
        let (lo, hi) = region.base().bbox();
        for a in 0..grid {
            for b in 0..grid {
                let p = Point::new(
                    lo.x + (hi.x - lo.x) * a as f64 / (grid - 1) as f64,
                    lo.y + (hi.y - lo.y) * b as f64 / (grid - 1) as f64,
                );
                if !region.contains_closed(p) || window.is_some_and(|w| !w.contains_closed(p)) {
                    continue;
                }
                let m = f.eval_in(i, p).norm();
                rep.record(m, m >= margin, || Violation {
                    check: Check::Nonzero,
                    patch: f.id(i),
                    other: None,
                    at: p,
                    value: m,
                });
            }
        }
    }
    Ok(rep)
}

pub fn validate(f: &PatchyField, cfg: &ValidationConfig) -> Result<Vec<ValidationReport>, FieldError> {
    Ok(vec![
        validate_inward(f, cfg.n_bnd),
        validate_transversal(f, cfg.tol_tr, cfg.n_bnd),
        validate_nonzero(f, cfg.margin, cfg.grid, cfg.window.as_ref())?,
    ])
}
