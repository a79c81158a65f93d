//! Nearest point maps onto convex compacta and probes of their regularity.

pub mod fw;
pub mod general;
pub mod probes;
pub mod ured;

pub use fw::{lmo_diamond, nearest_point_fw, Vertex, FW_GAP_TOL};
pub use general::{nearest_point_general, GeneralConfig};
pub use probes::{rotundity_probe, uniform_continuity_probe, RotundityReport, UniformContinuityReport};
pub use ured::{ured_renorm, UREDNorm};

use crate::norm::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct NearestPointResult {
    pub point: Point,
    pub distance: f64,
    pub iterations: usize,
    /// Duality gap for Frank-Wolfe, last polish improvement for the general solver.
    pub residual: f64,
    pub converged: bool,
    /// Largest distance between near-optimal multi-start answers.
    pub dispersion: f64,
    pub note: Option<String>,
}

impl NearestPointResult {
    pub(crate) fn inside(x: &Point) -> Self {
        Self {
            point: x.clone(),
            distance: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
            dispersion: 0.0,
            note: None,
        }
    }
}
