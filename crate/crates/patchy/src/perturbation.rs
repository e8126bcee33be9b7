//! Impulsive perturbations of bounded variation: finitely many jumps plus a
//! piecewise-constant drift rate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbationError {
    #[error("perturbation contains a non-finite value")]
    NonFinite,
    #[error("drift piece [{0}, {1}] has non-positive length")]
    EmptyPiece(f64, f64),
    #[error("drift pieces overlap at t = {0}")]
    OverlappingDrift(f64),
    #[error("cannot rescale a perturbation with zero total variation")]
    ZeroVariation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jump {
    pub t: f64,
    pub d: Point,
}

/// Constant rate on `[t0, t1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftPiece {
    pub t0: f64,
    pub t1: f64,
    pub rate: Point,
}

/// `w(t) = sum of jumps before t + integral of the drift up to t`.
///
/// Left-continuous: a jump at `t` is part of `w(t+)` but not of `w(t)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct BvPath {
    jumps: Vec<Jump>,
    drift: Vec<DriftPiece>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    #[serde(default)]
    jumps: Vec<Jump>,
    #[serde(default)]
    drift: Vec<DriftPiece>,
}

impl TryFrom<RawPath> for BvPath {
    type Error = PerturbationError;
    fn try_from(r: RawPath) -> Result<Self, Self::Error> {
        BvPath::new(r.jumps, r.drift)
    }
}

impl From<BvPath> for RawPath {
    fn from(p: BvPath) -> Self {
        RawPath {
            jumps: p.jumps,
            drift: p.drift,
        }
    }
}

impl BvPath {
    pub fn new(mut jumps: Vec<Jump>, mut drift: Vec<DriftPiece>) -> Result<Self, PerturbationError> {
        if jumps.iter().any(|j| !j.t.is_finite() || !j.d.is_finite())
            || drift.iter().any(|p| !p.t0.is_finite() || !p.t1.is_finite() || !p.rate.is_finite())
        {
            return Err(PerturbationError::NonFinite);
        }
        if let Some(p) = drift.iter().find(|p| p.t1 <= p.t0) {
            return Err(PerturbationError::EmptyPiece(p.t0, p.t1));
        }
        jumps.sort_by(|a, b| a.t.total_cmp(&b.t));
        drift.sort_by(|a, b| a.t0.total_cmp(&b.t0));
        if let Some(w) = drift.windows(2).find(|w| w[1].t0 < w[0].t1) {
            return Err(PerturbationError::OverlappingDrift(w[1].t0));
        }
        Ok(BvPath { jumps, drift })
    }

    pub fn zero() -> Self {
        BvPath::default()
    }

    pub fn single_jump(t: f64, d: Point) -> Self {
        BvPath {
            jumps: vec![Jump { t, d }],
            drift: Vec::new(),
        }
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn drift(&self) -> &[DriftPiece] {
        &self.drift
    }

    pub fn is_zero(&self) -> bool {
        self.total_variation() == 0.0
    }

    pub fn total_variation(&self) -> f64 {
        self.jumps.iter().map(|j| j.d.norm()).sum::<f64>()
            + self.drift.iter().map(|p| p.rate.norm() * (p.t1 - p.t0)).sum::<f64>()
    }

    /// Variation carried by jumps in `[a, b)` and drift over `[a, b]`.
    pub fn variation_on(&self, a: f64, b: f64) -> f64 {
        let jumps: f64 = self.jumps.iter().filter(|j| j.t >= a && j.t < b).map(|j| j.d.norm()).sum();
        let drift: f64 = self
            .drift
            .iter()
            .map(|p| p.rate.norm() * (p.t1.min(b) - p.t0.max(a)).max(0.0))
            .sum();
        // an empty float sum is -0.0; adding +0.0 normalizes it
        0.0 + jumps + drift
    }

    /// Drift rate active at `t` (pieces are closed on the left).
    pub fn rate_at(&self, t: f64) -> Point {
        self.drift
            .iter()
            .find(|p| p.t0 <= t && t < p.t1)
            .map_or(Point::ZERO, |p| p.rate)
    }

    /// Left-continuous value, with `w(t0) = 0`.
    pub fn value(&self, t0: f64, t: f64) -> Point {
        let mut w = Point::ZERO;
        for j in &self.jumps {
            if j.t >= t0 && j.t < t {
                w += j.d;
            }
        }
        for p in &self.drift {
            let len = (p.t1.min(t) - p.t0.max(t0)).max(0.0);
            w += p.rate * len;
        }
        w
    }

    /// Jump times and drift breakpoints inside `(a, b)`, sorted and unique.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut ts: Vec<f64> = self.jumps.iter().map(|j| j.t).collect();
        for p in &self.drift {
            ts.push(p.t0);
            ts.push(p.t1);
        }
        ts.retain(|&t| t > a && t < b);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    pub fn scaled(&self, s: f64) -> Self {
        BvPath {
            jumps: self.jumps.iter().map(|j| Jump { t: j.t, d: j.d * s }).collect(),
            drift: self
                .drift
                .iter()
                .map(|p| DriftPiece { rate: p.rate * s, ..*p })
                .collect(),
        }
    }

    /// Rescales every displacement so that the total variation equals `tv`.
    pub fn with_total_variation(&self, tv: f64) -> Result<Self, PerturbationError> {
        let cur = self.total_variation();
        if cur == 0.0 {
            return Err(PerturbationError::ZeroVariation);
        }
        Ok(self.scaled(tv / cur))
    }

    pub fn time_shifted(&self, dt: f64) -> Self {
        BvPath {
            jumps: self.jumps.iter().map(|j| Jump { t: j.t + dt, d: j.d }).collect(),
            drift: self
                .drift
                .iter()
                .map(|p| DriftPiece {
                    t0: p.t0 + dt,
                    t1: p.t1 + dt,
                    rate: p.rate,
                })
                .collect(),
        }
    }

    /// Splits every drift piece at `cuts`; the path itself is unchanged.
    pub fn refined(&self, cuts: &[f64]) -> Self {
        let mut drift = Vec::new();
        for p in &self.drift {
            let mut ts: Vec<f64> = cuts.iter().copied().filter(|&c| c > p.t0 && c < p.t1).collect();
            ts.sort_by(f64::total_cmp);
            let mut a = p.t0;
            for c in ts.into_iter().chain(std::iter::once(p.t1)) {
                drift.push(DriftPiece { t0: a, t1: c, rate: p.rate });
                a = c;
            }
        }
        BvPath {
            jumps: self.jumps.clone(),
            drift,
        }
    }

    /// Follows `self` on its horizon, then `other` shifted to start at `at`.
    pub fn concat(&self, other: &BvPath, at: f64) -> Result<Self, PerturbationError> {
        let o = other.time_shifted(at);
        let mut jumps = self.jumps.clone();
        jumps.extend(o.jumps);
        let mut drift = self.drift.clone();
        drift.extend(o.drift);
        BvPath::new(jumps, drift)
    }

    /// Drops jumps in `[a, b]` and drift inside `(a, b)`, then adds a jump
    /// at `b`.
    pub(crate) fn excise(&self, a: f64, b: f64, bridge: Point) -> Self {
        let mut jumps: Vec<Jump> = self.jumps.iter().filter(|j| !(j.t >= a && j.t <= b)).copied().collect();
        if bridge.norm() > 0.0 {
            jumps.push(Jump { t: b, d: bridge });
        }
        jumps.sort_by(|x, y| x.t.total_cmp(&y.t));
        let mut drift = Vec::new();
        for p in &self.drift {
            if p.t0 < a {
                drift.push(DriftPiece { t1: p.t1.min(a), ..*p });
            }
            if p.t1 > b {
                drift.push(DriftPiece { t0: p.t0.max(b), ..*p });
            }
        }
        drift.retain(|p| p.t1 > p.t0);
        BvPath { jumps, drift }
    }

    /// Random jumps with uniform times in `(t0, t1)` and uniform directions,
    /// rescaled to total variation `tv`.
    pub fn random_jumps(seed: u64, count: usize, t0: f64, t1: f64, tv: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jumps = Vec::with_capacity(count);
        for _ in 0..count {
            let t = rng.gen_range(t0..t1);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let m = rng.gen_range(0.1..1.0);
            jumps.push(Jump {
                t,
                d: Point::new(th.cos(), th.sin()) * m,
            });
        }
        let p = BvPath::new(jumps, Vec::new()).expect("finite by construction");
        p.with_total_variation(tv).unwrap_or(p)
    }
}

/// Perturbation given as an inner path `e1` (jumps plus piecewise-linear
/// motion) and an outer integrable rate `e2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerOuterPerturbation {
    #[serde(default)]
    pub inner_jumps: Vec<Jump>,
    /// Slopes of the continuous part of the inner path.
    #[serde(default)]
    pub inner_slope: Vec<DriftPiece>,
    #[serde(default)]
    pub outer: Vec<DriftPiece>,
}

/// `w(t) = e1(t) + int_{t0}^t e2(s) ds`, discretized on the union of both
/// breakpoint grids.
pub fn from_inner_outer(p: &InnerOuterPerturbation, t0: f64) -> Result<BvPath, PerturbationError> {
    let mut grid: Vec<f64> = p
        .inner_slope
        .iter()
        .chain(&p.outer)
        .flat_map(|q| [q.t0.max(t0), q.t1.max(t0)])
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sum_at = |pieces: &[DriftPiece], t: f64| {
        pieces
            .iter()
            .filter(|q| q.t0 <= t && t < q.t1)
            .fold(Point::ZERO, |acc, q| acc + q.rate)
    };
    let mut drift = Vec::new();
    for w in grid.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let rate = sum_at(&p.inner_slope, mid) + sum_at(&p.outer, mid);
        if rate.norm() > 0.0 {
            drift.push(DriftPiece { t0: w[0], t1: w[1], rate });
        }
    }
    BvPath::new(p.inner_jumps.clone(), drift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_variation_examples() {
        assert_eq!(BvPath::single_jump(1.0, Point::new(0.0, 0.2)).total_variation(), 0.2);
        assert_eq!(BvPath::zero().total_variation(), 0.0);
        let w = BvPath::new(
            vec![
                Jump { t: 0.5, d: Point::new(0.1, 0.0) },
                Jump { t: 1.5, d: Point::new(0.0, -0.1) },
            ],
            vec![DriftPiece {
                t0: 0.0,
                t1: 2.0,
                rate: Point::new(0.03, 0.04),
            }],
        )
        .unwrap();
        assert!((w.total_variation() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn left_continuity() {
        let w = BvPath::single_jump(1.0, Point::new(0.5, 0.0));
        assert_eq!(w.value(0.0, 1.0), Point::ZERO);
        assert_eq!(w.value(0.0, 1.0 + 1e-12), Point::new(0.5, 0.0));
        // jump at the initial time is applied right after it
        let w0 = BvPath::single_jump(0.0, Point::new(0.5, 0.0));
        assert_eq!(w0.value(0.0, 0.0), Point::ZERO);
        assert_eq!(w0.value(0.0, 1e-9), Point::new(0.5, 0.0));
    }

    #[test]
    fn inner_outer_reduction() {
        let step = InnerOuterPerturbation {
            inner_jumps: vec![Jump { t: 1.0, d: Point::new(0.1, 0.0) }],
            ..Default::default()
        };
        let w = from_inner_outer(&step, 0.0).unwrap();
        assert_eq!(w.jumps().len(), 1);
        assert!((w.total_variation() - 0.1).abs() < 1e-15);

        let outer = InnerOuterPerturbation {
            outer: vec![DriftPiece {
                t0: 0.0,
                t1: 1.0,
                rate: Point::new(0.2, 0.0),
            }],
            ..Default::default()
        };
        assert!((from_inner_outer(&outer, 0.0).unwrap().total_variation() - 0.2).abs() < 1e-15);

        let cancel = InnerOuterPerturbation {
            inner_jumps: vec![],
            inner_slope: vec![DriftPiece {
                t0: 0.0,
                t1: 1.0,
                rate: Point::new(0.1, 0.0),
            }],
            outer: vec![DriftPiece {
                t0: 0.0,
                t1: 1.0,
                rate: Point::new(-0.1, 0.0),
            }],
        };
        assert!(from_inner_outer(&cancel, 0.0).unwrap().total_variation() < 1e-10);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            BvPath::new(vec![], vec![DriftPiece { t0: 1.0, t1: 1.0, rate: Point::ZERO }]),
            Err(PerturbationError::EmptyPiece(1.0, 1.0))
        );
        let overlap = BvPath::new(
            vec![],
            vec![
                DriftPiece { t0: 0.0, t1: 1.0, rate: Point::ZERO },
                DriftPiece { t0: 0.5, t1: 2.0, rate: Point::ZERO },
            ],
        );
        assert_eq!(overlap, Err(PerturbationError::OverlappingDrift(0.5)));
        assert_eq!(
            BvPath::new(vec![Jump { t: f64::NAN, d: Point::ZERO }], vec![]),
            Err(PerturbationError::NonFinite)
        );
        assert_eq!(BvPath::zero().with_total_variation(1.0), Err(PerturbationError::ZeroVariation));
    }

    #[test]
    fn excise_replaces_interval_with_bridge() {
        let w = BvPath::new(
            vec![Jump { t: 1.0, d: Point::new(0.0, 0.3) }, Jump { t: 3.0, d: Point::new(0.1, 0.0) }],
            vec![DriftPiece { t0: 0.0, t1: 4.0, rate: Point::new(0.01, 0.0) }],
        )
        .unwrap();
        let e = w.excise(1.0, 2.0, Point::new(0.0, 0.05));
        assert_eq!(e.jumps().len(), 2);
        assert_eq!(e.jumps()[0].t, 2.0);
        assert!((e.total_variation() - (0.05 + 0.1 + 0.03)).abs() < 1e-15);
    }

    #[test]
    fn serde_roundtrip() {
        let w = BvPath::new(
            vec![Jump { t: 1.0, d: Point::new(0.6, 0.8) }],
            vec![DriftPiece { t0: 0.0, t1: 1.0, rate: Point::new(0.0, 0.1) }],
        )
        .unwrap();
        let s = serde_json::to_string(&w).unwrap();
        assert_eq!(s, r#"{"jumps":[{"t":1.0,"d":[0.6,0.8]}],"drift":[{"t0":0.0,"t1":1.0,"rate":[0.0,0.1]}]}"#);
        let back: BvPath = serde_json::from_str(&s).unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<BvPath>(r#"{"jumps":[],"drift":[{"t0":1,"t1":0,"rate":[0,0]}]}"#).is_err());
    }

    #[test]
    fn random_jumps_are_seeded() {
        let a = BvPath::random_jumps(7, 5, 0.0, 2.0, 0.01);
        let b = BvPath::random_jumps(7, 5, 0.0, 2.0, 0.01);
        assert_eq!(a, b);
        assert!((a.total_variation() - 0.01).abs() < 1e-15);
        assert_ne!(a, BvPath::random_jumps(8, 5, 0.0, 2.0, 0.01));
    }
}
