//! WebAssembly bindings for the static page in `www/`. Every call returns a
//! JSON picture: named polylines plus a text summary.

use patchy::integrate::solve_perturbed;
use patchy::rates::{example_1_4_paths, Example14};
use patchy::scenario::Scenario;
use patchy::shadow::{shadow as run_shadow, ShadowContext};
use patchy::{PatchyField, Point, Trajectory};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const DEMO_SCENARIO: &str = include_str!("../../patchy/scenarios/demo_generic.cfg");

/// Samples kept per plotted path.
const PLOT_POINTS: usize = 600;

#[derive(Debug, Serialize)]
pub struct Polyline {
    pub name: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
pub struct Picture {
    pub ok: bool,
    pub summary: String,
    pub lines: Vec<Polyline>,
}

impl Picture {
    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("pictures serialize")
    }
}

fn line(name: impl Into<String>, pts: impl IntoIterator<Item = Point>) -> Polyline {
    Polyline {
        name: name.into(),
        points: pts.into_iter().map(|p| [p.x, p.y]).collect(),
    }
}

fn thinned(pts: Vec<Point>) -> Vec<Point> {
    let step = pts.len().div_ceil(PLOT_POINTS).max(1);
    let last = pts.last().copied();
    let mut out: Vec<Point> = pts.into_iter().step_by(step).collect();
    if let Some(p) = last {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

fn outlines(f: &PatchyField) -> Vec<Polyline> {
    f.patches()
        .iter()
        .map(|p| {
            let v = p.domain.vertices();
            line(format!("patch {}", p.id), v.iter().copied().chain(v.first().copied()))
        })
        .collect()
}

/// One polyline per continuous stretch, so jumps are drawn as gaps.
fn stretches(name: &str, y: &Trajectory) -> Vec<Polyline> {
    let mut out = Vec::new();
    let mut cur: Vec<Point> = Vec::new();
    for p in &y.pieces {
        if cur.last().is_some_and(|q| q.dist(p.start()) > patchy::integrate::JOIN_TOL) {
            out.push(line(name, thinned(std::mem::take(&mut cur))));
        }
        cur.extend(p.samples.iter().map(|s| s.x));
    }
    out.push(line(name, thinned(cur)));
    out
}

fn parse(json: &str) -> Result<(Scenario, PatchyField), String> {
    let s = Scenario::from_json(json).map_err(|e| e.to_string())?;
    let f = s.field().map_err(|e| e.to_string())?;
    Ok((s, f))
}

/// Runs the three validators; violations are drawn as single points.
pub fn validate_picture(json: &str) -> Result<Picture, String> {
    let (s, f) = parse(json)?;
    let reports = s.validate().map_err(|e| e.to_string())?;
    let mut lines = outlines(&f);
    let mut summary = Vec::new();
    for r in &reports {
        summary.push(format!(
            "{}: {} (margin {:.3e}, {} samples, {} violations)",
            r.check.name(),
            if r.ok() { "ok" } else { "FAILS" },
            r.margin,
            r.samples,
            r.violations.len()
        ));
        lines.extend(r.violations.iter().map(|v| line(format!("violation {}", r.check.name()), [v.at])));
    }
    Ok(Picture {
        ok: reports.iter().all(|r| r.ok()),
        summary: summary.join("\n"),
        lines,
    })
}

/// Perturbed solution of the scenario rescaled to total variation `tv`
/// (the scenario's own perturbation when `tv` is not positive) and the
/// unperturbed solution the shadowing pipeline puts next to it.
pub fn shadow_picture(json: &str, tv: f64) -> Result<Picture, String> {
    let (s, f) = parse(json)?;
    if let Some(r) = s.validate().map_err(|e| e.to_string())?.iter().find(|r| !r.ok()) {
        return Err(format!("the field fails the {} check", r.check.name()));
    }
    let family = s.family(s.run.seed);
    let w = if tv > 0.0 { family.member(tv).map_err(|e| e.to_string())? } else { family.shape.clone() };
    let opts = s.run.solver;
    let y = solve_perturbed(&f, &w, s.run.x0, s.run.t0, s.run.t1, &opts).map_err(|e| format!("integrate: {e}"))?;
    let ctx = ShadowContext::fit(&f, &opts);
    let r = run_shadow(&f, &ctx, &y, &w).map_err(|e| format!("shadow: {e}"))?;
    let mut lines = outlines(&f);
    lines.extend(stretches("perturbed", &y));
    lines.extend(stretches("shadow", &r.x));
    let stages: Vec<String> = r.stagelog.iter().map(|l| format!("{} {:.3e}", l.stage, l.budget_out)).collect();
    Ok(Picture {
        ok: true,
        summary: format!(
            "total variation {:.3e}\nsup distance {:.3e} (ratio {:.3})\nstage budgets: {}",
            w.total_variation(),
            r.sup_distance,
            r.sup_distance / w.total_variation().max(f64::MIN_POSITIVE),
            stages.join(", ")
        ),
        lines,
    })
}

/// Both solutions of the curved-boundary tangential example.
pub fn tangential_picture(alpha: f64, beta: f64, eps: f64) -> Result<Picture, String> {
    let s = Example14::new(alpha, beta).map_err(|e| e.to_string())?;
    let r = example_1_4_paths(&s, eps, 1e-3).map_err(|e| e.to_string())?;
    let grid = |a: f64, b: f64| (0..=200).map(move |k| a + (b - a) * k as f64 / 200.0);
    let lines = vec![
        line("gamma1", grid(-1.0, 1.0).map(|x| Point::new(x, x.abs().powf(alpha)))),
        line("gamma2", grid(-0.2, 2.0).map(|y| Point::new((y - 1.0).abs().powf(beta), y))),
        line("unperturbed", thinned(r.unperturbed.iter().map(|q| q.x).collect())),
        line("perturbed", thinned(r.perturbed.iter().map(|q| q.x).collect())),
    ];
    Ok(Picture {
        ok: true,
        summary: format!(
            "jump size {:.3e}\ndistance after switching {:.4e}\neps^(1/beta) = {:.4e}",
            r.tv,
            r.distance,
            eps.powf(1.0 / beta)
        ),
        lines,
    })
}

fn js(r: Result<Picture, String>) -> Result<String, JsError> {
    r.map(|p| p.to_json()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = demoScenario)]
pub fn demo_scenario() -> String {
    DEMO_SCENARIO.to_string()
}

#[wasm_bindgen]
pub fn validate(json: &str) -> Result<String, JsError> {
    js(validate_picture(json))
}

#[wasm_bindgen]
pub fn shadow(json: &str, tv: f64) -> Result<String, JsError> {
    js(shadow_picture(json, tv))
}

#[wasm_bindgen]
pub fn tangential(alpha: f64, beta: f64, eps: f64) -> Result<String, JsError> {
    js(tangential_picture(alpha, beta, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_validates() {
        let p = validate_picture(DEMO_SCENARIO).unwrap();
        assert!(p.ok, "{}", p.summary);
        assert_eq!(p.lines.len(), 2);
    }

    #[test]
    fn tangent_variant_reports_violations() {
        let text = DEMO_SCENARIO.replace("[[2, 0.5], [5, 0.5], [5, 1.5], [2, 1.5]]", "[[2, 1], [5, 1], [5, 1.5], [2, 1.5]]");
        let p = validate_picture(&text).unwrap();
        assert!(!p.ok);
        assert!(p.summary.contains("transversal: FAILS"));
        assert!(p.lines.iter().any(|l| l.name == "violation transversal"));
        assert!(shadow_picture(&text, 1e-3).unwrap_err().contains("fails the"));
    }

    #[test]
    fn shadow_draws_both_paths() {
        let p = shadow_picture(DEMO_SCENARIO, 1e-3).unwrap();
        assert!(p.lines.iter().filter(|l| l.name == "perturbed").count() == 2, "the jump splits the perturbed path");
        assert_eq!(p.lines.iter().filter(|l| l.name == "shadow").count(), 1);
        assert!(p.lines.iter().all(|l| l.points.len() <= PLOT_POINTS + 2));
        assert!(p.summary.contains("sup distance 1.000e-3"), "{}", p.summary);
    }

    #[test]
    fn tangential_distance_matches_the_root() {
        let p = tangential_picture(2.0, 2.0, 1e-2).unwrap();
        assert!(p.summary.contains("jump size 2.000e-4"), "{}", p.summary);
        assert!(p.summary.contains("distance after switching 1.001"), "{}", p.summary);
        assert!(tangential_picture(2.0, 2.0, 0.9).is_err());
    }

    #[test]
    fn bad_json_is_an_error() {
        assert!(validate_picture("{").is_err());
    }
}
