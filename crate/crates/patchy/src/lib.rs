//! Polygonal patchy vector fields under impulsive perturbations of bounded
//! variation: simulation, shadowing by unperturbed solutions and rate sweeps.

pub mod field;
pub mod geometry;
pub mod integrate;
pub mod perturbation;
pub mod rates;
pub mod scenario;
pub mod shadow;

pub use field::{Patch, PatchId, PatchyField, SmoothFieldSpec};
pub use geometry::{Point, Polygon, PolygonalRegion, Segment};
pub use integrate::{SolveError, SolverOpts, Trajectory};
pub use perturbation::BvPath;
