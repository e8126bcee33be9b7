//! Versioned JSON scenario files: field, perturbation, run settings and
//! validator settings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{validate, Check, FieldError, Patch, PatchyField, SmoothFieldSpec, ValidationConfig, ValidationReport};
use crate::geometry::{Point, Polygon};
use crate::integrate::SolverOpts;
use crate::perturbation::{BvPath, PerturbationError};
use crate::rates::{JumpFamily, Method};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario is not valid JSON for schema {SCHEMA_VERSION}: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema version {0}, expected {SCHEMA_VERSION}")]
    Schema(u32),
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("perturbation: {0}")]
    Perturbation(#[from] PerturbationError),
    #[error("patch {0} has a non-finite coefficient")]
    NonFiniteField(i64),
    #[error("run: {0}")]
    Run(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchSpec {
    pub index: i64,
    pub polygon: Polygon,
    pub field: SmoothFieldSpec,
}

/// Random jumps drawn from the scenario seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomJumps {
    pub count: usize,
    pub tv: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationSpec {
    Explicit(BvPath),
    Random(RandomJumps),
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec::Explicit(BvPath::zero())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub x0: Point,
    #[serde(default)]
    pub solver: SolverOpts,
    /// Total variations of a rate sweep.
    #[serde(default)]
    pub tv: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: Method,
}

fn default_method() -> Method {
    Method::Shadow
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSpec {
    pub n_bnd: usize,
    pub tol_tr: f64,
    pub margin: f64,
    pub grid: usize,
    /// Window to which the nonzero check is restricted.
    pub window: Option<Polygon>,
}

impl Default for ValidationSpec {
    fn default() -> Self {
        let d = ValidationConfig::default();
        ValidationSpec {
            n_bnd: d.n_bnd,
            tol_tr: d.tol_tr,
            margin: d.margin,
            grid: d.grid,
            window: None,
        }
    }
}

/// Expected validator outcome, used by the golden corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub valid: bool,
    /// Checks expected to fail when `valid` is false.
    #[serde(default)]
    pub failing: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub patches: Vec<PatchSpec>,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

impl Scenario {
    /// Parses and checks everything that does not need integration.
    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema").and_then(serde_json::Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => return Err(ScenarioError::Schema(v.try_into().unwrap_or(u32::MAX))),
            None => return Err(ScenarioError::Run("missing integer field `schema`".into())),
        }
        let s: Scenario = serde_json::from_value(value)?;
        s.check()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    fn check(&self) -> Result<(), ScenarioError> {
        if let Some(p) = self.patches.iter().find(|p| !p.field.is_finite()) {
            return Err(ScenarioError::NonFiniteField(p.index));
        }
        let r = &self.run;
        let o = &r.solver;
        if !(r.t0.is_finite() && r.t1.is_finite() && r.t1 > r.t0) {
            return Err(ScenarioError::Run(format!("horizon [{}, {}] is empty", r.t0, r.t1)));
        }
        if !r.x0.is_finite() {
            return Err(ScenarioError::Run("start point is not finite".into()));
        }
        if !(o.h > 0.0 && o.tol_t > 0.0 && o.max_time > 0.0 && o.h.is_finite()) {
            return Err(ScenarioError::Run("solver step, tolerance and time cap must be positive".into()));
        }
        if let Some(&t) = r.tv.iter().find(|t| !t.is_finite()) {
            return Err(ScenarioError::Run(format!("sweep value {t} is not finite")));
        }
        if let PerturbationSpec::Random(j) = self.perturbation {
            if !(j.tv.is_finite() && j.tv >= 0.0) {
                return Err(ScenarioError::Run(format!("random perturbation variation {} is invalid", j.tv)));
            }
        }
        let f = self.field()?;
        if f.alpha_star(r.x0).is_none() {
            return Err(ScenarioError::Field(FieldError::OutsideDomain(r.x0)));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<PatchyField, ScenarioError> {
        let patches = self
            .patches
            .iter()
            .map(|p| Patch::new(p.index, p.polygon.clone(), p.field.clone()))
            .collect();
        Ok(PatchyField::new(patches)?)
    }

    /// The run's perturbation, drawing random jumps from `seed`.
    pub fn perturbation(&self, seed: u64) -> BvPath {
        match &self.perturbation {
            PerturbationSpec::Explicit(w) => w.clone(),
            PerturbationSpec::Random(j) => BvPath::random_jumps(seed, j.count, self.run.t0, self.run.t1, j.tv),
        }
    }

    /// Sweep family whose shape is the run's perturbation.
    pub fn family(&self, seed: u64) -> JumpFamily {
        JumpFamily {
            x0: self.run.x0,
            t0: self.run.t0,
            t1: self.run.t1,
            shape: self.perturbation(seed),
        }
    }

    pub fn validation_config(&self) -> ValidationConfig {
        let v = &self.validation;
        ValidationConfig {
            n_bnd: v.n_bnd,
            tol_tr: v.tol_tr,
            margin: v.margin,
            grid: v.grid,
            window: v.window.clone(),
        }
    }

    pub fn validate(&self) -> Result<Vec<ValidationReport>, ScenarioError> {
        Ok(validate(&self.field()?, &self.validation_config())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "name": "box",
        "patches": [
            {"index": 0, "polygon": [[0,0],[1,0],[1,1],[0,1]],
             "field": {"constant": [0.5, 0.5], "linear": [[-1,0],[0,-1]]}}
        ],
        "perturbation": {"explicit": {"jumps": [{"t": 0.5, "d": [0.01, 0]}]}},
        "run": {"t1": 2, "x0": [0.2, 0.2]}
    }"#;

    #[test]
    fn minimal_scenario_loads() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.run.t0, 0.0);
        assert_eq!(s.run.method, Method::Shadow);
        assert_eq!(s.run.solver, SolverOpts::default());
        assert!((s.perturbation(0).total_variation() - 0.01).abs() < 1e-15);
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let text = MINIMAL.replace("\"schema\": 1", "\"schema\": 2");
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Schema(2))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"name\": \"box\"", "\"name\": \"box\", \"colour\": 3");
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Parse(_))));
    }

    #[test]
    fn start_outside_every_patch_is_rejected() {
        let text = MINIMAL.replace("\"x0\": [0.2, 0.2]", "\"x0\": [2, 2]");
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Field(FieldError::OutsideDomain(_)))));
    }

    #[test]
    fn random_perturbation_follows_the_seed() {
        let text = MINIMAL.replace(r#"{"explicit": {"jumps": [{"t": 0.5, "d": [0.01, 0]}]}}"#, r#"{"random": {"count": 3, "tv": 0.02}}"#);
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.perturbation(4), s.perturbation(4));
        assert_ne!(s.perturbation(4), s.perturbation(5));
        assert!((s.perturbation(4).total_variation() - 0.02).abs() < 1e-15);
    }
}
