//! Falsifier searches for rotundity and uniform continuity. A reported
//! witness refutes the property; the absence of one is only evidence.

use crate::error::{invalid, Result};
use crate::metric::{estimate_modulus, ModulusTable, PairSource};
use crate::norm::{euclidean_direction, Norm, Point};
use crate::optim::bisect_ray;
use crate::rng::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Chords shorter than this do not count as witnesses.
pub const MIN_GAP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotundityReport {
    pub eta: f64,
    pub samples: usize,
    /// Chords whose midpoint has norm at least `1 - η`.
    pub accepted: usize,
    /// Longest accepted chord `|x - y|`.
    pub gap: f64,
    pub witness_x: Vec<f64>,
    pub witness_y: Vec<f64>,
    pub midpoint_norm: f64,
    /// `gap >= 0.1`.
    pub found: bool,
}

/// Search for unit vectors `x, y` with `x - y` parallel to `z`,
/// `|x + y| / 2 >= 1 - η` and `|x - y|` large. Each sample places a point
/// `m` with `1 - η <= |m| <= 1` and cuts the unit sphere along the line
/// `m + s z`.
pub fn rotundity_probe(norm: &dyn Norm, z: &Point, samples: usize, eta: f64, seed: u64) -> Result<RotundityReport> {
    if (norm.norm(z) - 1.0).abs() > 1e-9 {
        return Err(invalid("the direction z must have norm one"));
    }
    if !(eta > 0.0) {
        return Err(invalid("η must be positive"));
    }
    let d = norm.dim();
    let mut rng = stream_rng(seed, 0);
    let mut best = RotundityReport {
        eta,
        samples,
        accepted: 0,
        gap: 0.0,
        witness_x: vec![0.0; d],
        witness_y: vec![0.0; d],
        midpoint_norm: f64::NAN,
        found: false,
    };
    for _ in 0..samples {
        let v = euclidean_direction(d, &mut rng);
        let m = &v * ((1.0 - eta * rng.random::<f64>()) / norm.norm(&v));
        let up = bisect_ray(|s| norm.norm(&(&m + z * s)) <= 1.0, 1.0, 1e-14);
        let down = bisect_ray(|s| norm.norm(&(&m - z * s)) <= 1.0, 1.0, 1e-14);
        let x = &m + z * up;
        let y = &m - z * down;
        let mid = norm.norm(&((&x + &y) * 0.5));
        if mid < 1.0 - eta {
            continue;
        }
        best.accepted += 1;
        let gap = up + down;
        if gap > best.gap {
            best.gap = gap;
            best.witness_x = x.as_slice().to_vec();
            best.witness_y = y.as_slice().to_vec();
            best.midpoint_norm = mid;
        }
    }
    best.found = best.gap >= MIN_GAP;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformContinuityReport {
    pub table: ModulusTable,
    pub threshold: f64,
    /// `omega` at the smallest scale.
    pub omega_min: f64,
    /// `omega` at the smallest scale is at most the threshold.
    pub verdict: bool,
    pub note: String,
}

/// Sampled modulus `omega(t)` of a nearest point map with a verdict on its
/// smallest scale.
pub fn uniform_continuity_probe<F>(
    map: F,
    norm: &dyn Norm,
    sampler: &dyn PairSource,
    scales: &[f64],
    samples: usize,
    threshold: f64,
    seed: u64,
) -> Result<UniformContinuityReport>
where
    F: Fn(&Point) -> Point + Sync,
{
    let table = estimate_modulus(map, norm, sampler, scales, samples, seed)?;
    let omega_min = table.omega[0];
    Ok(UniformContinuityReport {
        verdict: omega_min <= threshold,
        omega_min,
        threshold,
        table,
        note: "falsifier search: a small modulus is evidence, not proof".into(),
    })
}
