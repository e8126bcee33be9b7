//! Patches, the piecewise field they define and its structural validators.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, PointClass, Polygon, PolygonalRegion, Segment};

pub mod validate;

pub use validate::{validate, validate_inward, validate_nonzero, validate_transversal, Check, ValidationConfig, ValidationReport, Violation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("a patchy field needs at least one patch")]
    Empty,
    #[error("patch index {0} appears twice")]
    DuplicateIndex(PatchId),
    #[error("point ({}, {}) lies outside every patch", .0.x, .0.y)]
    OutsideDomain(Point),
    #[error("nonzero margin must be positive, got {0}")]
    NonPositiveMargin(f64),
}

/// User-supplied patch priority. Larger indices win where patches overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PatchId(pub i64);

impl fmt::Display for PatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Polynomial field of degree at most two:
/// `g_i(x) = c_i + sum_j A_ij x_j + sum_jk Q_ijk x_j x_k`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothFieldSpec {
    pub constant: Point,
    #[serde(default)]
    pub linear: [[f64; 2]; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<[[[f64; 2]; 2]; 2]>,
}

impl SmoothFieldSpec {
    pub fn constant(c: Point) -> Self {
        SmoothFieldSpec {
            constant: c,
            ..Default::default()
        }
    }

    pub fn affine(c: Point, a: [[f64; 2]; 2]) -> Self {
        SmoothFieldSpec {
            constant: c,
            linear: a,
            quadratic: None,
        }
    }

    pub fn eval(&self, p: Point) -> Point {
        let x = [p.x, p.y];
        let mut out = [self.constant.x, self.constant.y];
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.linear[i][0] * x[0] + self.linear[i][1] * x[1];
            if let Some(q) = &self.quadratic {
                for j in 0..2 {
                    for k in 0..2 {
                        *o += q[i][j][k] * x[j] * x[k];
                    }
                }
            }
        }
        Point::new(out[0], out[1])
    }

    pub fn jacobian(&self, p: Point) -> [[f64; 2]; 2] {
        let x = [p.x, p.y];
        let mut jac = self.linear;
        if let Some(q) = &self.quadratic {
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        jac[i][j] += q[i][j][k] * x[k] + q[i][k][j] * x[k];
                    }
                }
            }
        }
        jac
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.linear.iter().flatten().all(|v| v.is_finite())
            && self.quadratic.iter().flatten().flatten().flatten().all(|v| v.is_finite())
    }
}

type FieldCallback = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// The smooth field attached to a patch.
#[derive(Clone)]
pub enum FieldFn {
    Polynomial(SmoothFieldSpec),
    Custom(FieldCallback),
}

impl FieldFn {
    pub fn custom(f: impl Fn(Point) -> Point + Send + Sync + 'static) -> Self {
        FieldFn::Custom(Arc::new(f))
    }

    pub fn eval(&self, p: Point) -> Point {
        match self {
            FieldFn::Polynomial(s) => s.eval(p),
            FieldFn::Custom(f) => f(p),
        }
    }

    pub fn spec(&self) -> Option<&SmoothFieldSpec> {
        match self {
            FieldFn::Polynomial(s) => Some(s),
            FieldFn::Custom(_) => None,
        }
    }
}

impl fmt::Debug for FieldFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldFn::Polynomial(s) => f.debug_tuple("Polynomial").field(s).finish(),
            FieldFn::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl From<SmoothFieldSpec> for FieldFn {
    fn from(s: SmoothFieldSpec) -> Self {
        FieldFn::Polynomial(s)
    }
}

#[derive(Clone, Debug)]
pub struct Patch {
    pub id: PatchId,
    pub domain: Polygon,
    pub field: FieldFn,
}

impl Patch {
    pub fn new(id: i64, domain: Polygon, field: impl Into<FieldFn>) -> Self {
        Patch {
            id: PatchId(id),
            domain,
            field: field.into(),
        }
    }
}

/// Ordered patches. Internally addressed by position (0 = lowest priority);
/// [`PatchId`] is only used at the boundary of the library.
#[derive(Clone, Debug)]
pub struct PatchyField {
    patches: Vec<Patch>,
    regions: Vec<PolygonalRegion>,
}

impl PatchyField {
    pub fn new(mut patches: Vec<Patch>) -> Result<Self, FieldError> {
        if patches.is_empty() {
            return Err(FieldError::Empty);
        }
        patches.sort_by_key(|p| p.id);
        if let Some(w) = patches.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(FieldError::DuplicateIndex(w[0].id));
        }
        let regions = (0..patches.len())
            .map(|i| {
                let higher: Vec<Polygon> = patches[i + 1..].iter().map(|p| p.domain.clone()).collect();
                PolygonalRegion::difference(&patches[i].domain, &higher)
            })
            .collect();
        Ok(PatchyField { patches, regions })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch(&self, i: usize) -> &Patch {
        &self.patches[i]
    }

    pub fn id(&self, i: usize) -> PatchId {
        self.patches[i].id
    }

    pub fn position(&self, id: PatchId) -> Option<usize> {
        self.patches.iter().position(|p| p.id == id)
    }

    /// Effective region of patch `i`: its domain minus every higher domain.
    pub fn region(&self, i: usize) -> &PolygonalRegion {
        &self.regions[i]
    }

    /// Highest patch whose closed domain contains `p`.
    pub fn alpha_star(&self, p: Point) -> Option<usize> {
        (0..self.patches.len()).rev().find(|&i| self.patches[i].domain.contains_closed(p))
    }

    /// `alpha_star` with an explicit boundary snapping distance.
    pub fn alpha_star_within(&self, p: Point, tol: f64) -> Option<usize> {
        (0..self.patches.len())
            .rev()
            .find(|&i| self.patches[i].domain.classify_point(p, tol) != PointClass::Exterior)
    }

    pub fn eval(&self, p: Point) -> Result<Point, FieldError> {
        self.alpha_star(p)
            .map(|i| self.patches[i].field.eval(p))
            .ok_or(FieldError::OutsideDomain(p))
    }

    /// The smooth field of patch `i`, evaluated anywhere.
    pub fn eval_in(&self, i: usize, p: Point) -> Point {
        self.patches[i].field.eval(p)
    }

    pub fn in_region_closure(&self, i: usize, p: Point) -> bool {
        self.regions[i].contains_closed(p)
    }

    /// Bounding box of the union of all domains.
    pub fn bbox(&self) -> (Point, Point) {
        let mut pts = Vec::new();
        for p in &self.patches {
            let (lo, hi) = p.domain.bbox();
            pts.push(lo);
            pts.push(hi);
        }
        crate::geometry::bbox(&pts)
    }

    /// Largest field norm over a sampling of every domain.
    pub fn speed_bound(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, p) in self.patches.iter().enumerate() {
            let (lo, hi) = p.domain.bbox();
            for a in 0..=16 {
                for b in 0..=16 {
                    let q = Point::new(lo.x + (hi.x - lo.x) * a as f64 / 16.0, lo.y + (hi.y - lo.y) * b as f64 / 16.0);
                    if p.domain.contains_closed(q) {
                        m = m.max(self.eval_in(i, q).norm());
                    }
                }
            }
        }
        m
    }

    /// Finite-difference Lipschitz estimate of each smooth field over its domain.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut l: f64 = 0.0;
        let h = 1e-6;
        for (i, p) in self.patches.iter().enumerate() {
            let (lo, hi) = p.domain.bbox();
            for a in 0..=8 {
                for b in 0..=8 {
                    let q = Point::new(lo.x + (hi.x - lo.x) * a as f64 / 8.0, lo.y + (hi.y - lo.y) * b as f64 / 8.0);
                    let gx = (self.eval_in(i, q + Point::new(h, 0.0)) - self.eval_in(i, q - Point::new(h, 0.0))) * (0.5 / h);
                    let gy = (self.eval_in(i, q + Point::new(0.0, h)) - self.eval_in(i, q - Point::new(0.0, h))) * (0.5 / h);
                    let frob = (gx.dot(gx) + gy.dot(gy)).sqrt();
                    l = l.max(frob);
                }
            }
        }
        l
    }
}

/// Long segment along the supporting line of `edge`, covering `lo..hi`.
pub(crate) fn line_through(edge: &Segment, lo: Point, hi: Point) -> Segment {
    let u = edge.dir().normalized();
    let corners = [lo, hi, Point::new(lo.x, hi.y), Point::new(hi.x, lo.y)];
    let mut tmin = 0.0f64;
    let mut tmax = edge.len();
    for c in corners {
        let t = (c - edge.a).dot(u);
        tmin = tmin.min(t);
        tmax = tmax.max(t);
    }
    Segment::new(edge.a + u * (tmin - 1.0), edge.a + u * (tmax + 1.0))
}
