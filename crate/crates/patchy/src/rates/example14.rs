//! The tangential example: two curved switching lines touched tangentially
//! by the unperturbed solution, integrated directly rather than through the
//! polygonal machinery.

use serde::Serialize;

use super::{fit_power_law, PowerFit, RateError};
use crate::geometry::Point;
use crate::integrate::Sample;

/// Snapping distance for curve membership.
const CURVE_TOL: f64 = 1e-12;
const BISECTIONS: usize = 200;
/// Start of both solutions on the first axis, and the horizon.
const START_X: f64 = -1.0;
const HORIZON: f64 = 3.0;

/// Curves `x2 = |x1|^alpha` and `x1 = |x2 - 1|^beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Example14 {
    pub alpha: f64,
    pub beta: f64,
}

/// Active field: east below the first curve, north above it, east again
/// right of the second curve. Later variants take priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Mode {
    Lower,
    Middle,
    Upper,
}

impl Mode {
    fn velocity(self) -> Point {
        match self {
            Mode::Lower | Mode::Upper => Point::new(1.0, 0.0),
            Mode::Middle => Point::new(0.0, 1.0),
        }
    }
}

impl Example14 {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, RateError> {
        if !(alpha.is_finite() && beta.is_finite() && alpha > 1.0 && beta > 1.0) {
            return Err(RateError::BadExponents { alpha, beta });
        }
        Ok(Example14 { alpha, beta })
    }

    /// Nonnegative on and above the first curve.
    fn above_first(&self, p: Point) -> f64 {
        p.y - p.x.abs().powf(self.alpha)
    }

    fn above_first_grad(&self, p: Point) -> Point {
        Point::new(-self.alpha * p.x.signum() * p.x.abs().powf(self.alpha - 1.0), 1.0)
    }

    /// Nonnegative on and right of the second curve.
    fn right_of_second(&self, p: Point) -> f64 {
        p.x - (p.y - 1.0).abs().powf(self.beta)
    }

    fn right_of_second_grad(&self, p: Point) -> Point {
        let u = p.y - 1.0;
        Point::new(1.0, -self.beta * u.signum() * u.abs().powf(self.beta - 1.0))
    }

    pub fn mode(&self, p: Point) -> Mode {
        if self.right_of_second(p) >= -CURVE_TOL {
            Mode::Upper
        } else if self.above_first(p) >= -CURVE_TOL {
            Mode::Middle
        } else {
            Mode::Lower
        }
    }

    /// First `s` in `(0, len]` where `phi(p + s v) >= 0`. Both level
    /// functions are concave along lines, so the maximum is found by
    /// bisection on the directional derivative; a maximum within the
    /// tolerance of zero is a tangency and the touching point is returned,
    /// a positive maximum has a sign change located by bisection.
    fn first_hit(
        &self,
        phi: impl Fn(Point) -> f64,
        grad: impl Fn(Point) -> Point,
        p: Point,
        v: Point,
        len: f64,
    ) -> Option<f64> {
        let at = |s: f64| p + v * s;
        let slope = |s: f64| grad(at(s)).dot(v);
        if slope(0.0) <= 0.0 {
            return None;
        }
        let s_max = if slope(len) >= 0.0 {
            len
        } else {
            let (mut lo, mut hi) = (0.0, len);
            for _ in 0..BISECTIONS {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let top = phi(at(s_max));
        if top < -CURVE_TOL {
            return None;
        }
        if top <= CURVE_TOL {
            return Some(s_max);
        }
        let (mut lo, mut hi) = (0.0, s_max);
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if phi(at(mid)) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }

    /// Earliest switch to a higher mode along a straight step.
    fn next_switch(&self, mode: Mode, p: Point, len: f64) -> Option<f64> {
        let v = mode.velocity();
        let mut best: Option<f64> = None;
        if mode < Mode::Upper {
            best = self.first_hit(|q| self.right_of_second(q), |q| self.right_of_second_grad(q), p, v, len);
        }
        if mode < Mode::Middle {
            if let Some(s) = self.first_hit(|q| self.above_first(q), |q| self.above_first_grad(q), p, v, len) {
                best = Some(best.map_or(s, |b: f64| b.min(s)));
            }
        }
        best
    }

    /// Solution from `x0` at `t = 0` with an optional jump, sampled every
    /// `h` and at every switch. Returns the samples and the time of the
    /// last switch into [`Mode::Upper`].
    fn integrate(&self, x0: Point, jump: Option<(f64, Point)>, h: f64) -> (Vec<Sample>, Option<f64>) {
        let mut out = vec![Sample::new(0.0, x0)];
        let (mut t, mut p) = (0.0, x0);
        let mut mode = self.mode(p);
        let mut upper_since = (mode == Mode::Upper).then_some(0.0);
        let mut pending = jump;
        while t < HORIZON {
            let stop = pending.map_or(HORIZON, |(tj, _)| tj.min(HORIZON));
            let len = h.min(stop - t);
            match self.next_switch(mode, p, len) {
                Some(s) => {
                    p = p + mode.velocity() * s;
                    t += s;
                }
                None => {
                    p = p + mode.velocity() * len;
                    t = if len == stop - t { stop } else { t + len };
                }
            }
            out.push(Sample::new(t, p));
            if let Some((tj, d)) = pending {
                if t >= tj {
                    p = p + d;
                    out.push(Sample::new(t, p));
                    pending = None;
                }
            }
            let next = self.mode(p);
            if next == Mode::Upper && mode != Mode::Upper {
                upper_since = Some(t);
            }
            mode = next;
        }
        (out, upper_since)
    }
}

/// Both solutions of the tangential example for one `eps`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example14Paths {
    pub eps: f64,
    pub tv: f64,
    pub distance: f64,
    /// Through the two tangency points `(0, 0)` and `(0, 1)`.
    pub unperturbed: Vec<Sample>,
    /// Below the first axis, lifted onto the first curve at `x1 = eps`.
    pub perturbed: Vec<Sample>,
    /// Time from which both solutions are right of the second curve.
    pub switched: f64,
}

/// Integrates both solutions. The jump from `(eps, -eps^alpha)` to
/// `(eps, eps^alpha)` has size `2 eps^alpha`; the distance is the largest
/// componentwise gap once both solutions are right of the second curve.
pub fn example_1_4_paths(s: &Example14, eps: f64, h: f64) -> Result<Example14Paths, RateError> {
    let lift = eps.powf(s.alpha);
    let drop = eps.powf(1.0 / s.beta);
    if !(eps.is_finite() && eps >= 0.0 && eps < 1.0 && lift + drop < 1.0) {
        return Err(RateError::ScenarioOutOfRange(eps));
    }
    let (x, tx) = s.integrate(Point::new(START_X, 0.0), None, h);
    let jump = (eps - START_X, Point::new(0.0, 2.0 * lift));
    let (y, ty) = s.integrate(Point::new(START_X, -lift), Some(jump), h);
    let (Some(tx), Some(ty)) = (tx, ty) else {
        return Err(RateError::ScenarioOutOfRange(eps));
    };
    let switched = tx.max(ty);
    let distance = max_gap(&x, &y, switched);
    Ok(Example14Paths {
        eps,
        tv: 2.0 * lift,
        distance,
        unperturbed: x,
        perturbed: y,
        switched,
    })
}

pub fn example_1_4_distance(s: &Example14, eps: f64) -> Result<(f64, f64), RateError> {
    let r = example_1_4_paths(s, eps, 1e-2)?;
    Ok((r.tv, r.distance))
}

/// Right-continuous linear interpolation of a sample list.
fn eval_right(path: &[Sample], t: f64) -> Point {
    let k = path.partition_point(|s| s.t <= t);
    if k == 0 {
        return path[0].x;
    }
    if k == path.len() {
        return path[k - 1].x;
    }
    let (a, b) = (path[k - 1], path[k]);
    if b.t <= a.t {
        return b.x;
    }
    a.x.lerp(b.x, (t - a.t) / (b.t - a.t))
}

/// Largest componentwise gap from `from` on, over all sample times of both.
fn max_gap(x: &[Sample], y: &[Sample], from: f64) -> f64 {
    let mut times: Vec<f64> = x.iter().chain(y).map(|s| s.t).filter(|&t| t >= from).collect();
    times.push(from);
    times
        .into_iter()
        .map(|t| {
            let d = eval_right(x, t) - eval_right(y, t);
            d.x.abs().max(d.y.abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Example14Row {
    pub eps: f64,
    pub tv: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Example14Table {
    pub rows: Vec<Example14Row>,
    pub fit: PowerFit,
}

impl Example14Table {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,tv,distance\n");
        for r in &self.rows {
            s.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.eps, r.tv, r.distance));
        }
        s
    }

    pub fn summary(&self) -> String {
        self.fit.summary(self.rows.len())
    }
}

/// Distance against variation over a list of `eps`, with the log-log fit.
pub fn example_1_4_sweep(s: &Example14, eps: &[f64]) -> Result<Example14Table, RateError> {
    let rows = eps
        .iter()
        .map(|&e| example_1_4_distance(s, e).map(|(tv, distance)| Example14Row { eps: e, tv, distance }))
        .collect::<Result<Vec<_>, _>>()?;
    let points: Vec<(f64, f64)> = rows.iter().filter(|r| r.tv > 0.0).map(|r| (r.tv, r.distance)).collect();
    let fit = fit_power_law(&points)?;
    Ok(Example14Table { rows, fit })
}
