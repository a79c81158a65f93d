//! Nearest points for an arbitrary norm by projected subgradient descent.

use super::NearestPointResult;
use crate::convex::ConvexBody;
use crate::error::{invalid, Result};
use crate::norm::{Norm, Point};
use crate::optim::{ellipsoid_budget, ellipsoid_minimize, pattern_search};
use crate::rng::stream_rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneralConfig {
    pub starts: usize,
    /// Ellipsoid cuts per start; 0 picks `60 d (d + 1) + 200`.
    pub iterations: usize,
    pub polish_evals: usize,
    /// Multi-start answers farther apart than this mark the result non-unique.
    pub tie_tol: f64,
    pub seed: u64,
}

impl Default for GeneralConfig {
    fn default() -> Self {
        Self { starts: 4, iterations: 0, polish_evals: 2000, tie_tol: 1e-4, seed: 0 }
    }
}

/// Minimize `|x - y|` over `gauge(y) <= 1` with a central-cut ellipsoid
/// method: a cut from the gauge subgradient at infeasible centers, from the
/// norm subgradient at feasible ones. Each start seeds the ellipsoid as a
/// Euclidean ball around it covering `x`; the best feasible center is
/// finished by a compass search on `y ↦ |x - y / max(1, gauge(y))|`.
pub fn nearest_point_general(x: &Point, k: &dyn ConvexBody, norm: &dyn Norm, cfg: GeneralConfig) -> Result<NearestPointResult> {
    if cfg.starts == 0 {
        return Err(invalid("at least one start is needed"));
    }
    if x.len() != k.dim() || norm.dim() != k.dim() {
        return Err(crate::error::Error::DimensionMismatch { expected: k.dim(), got: x.len() });
    }
    if k.gauge(x) <= 1.0 {
        return Ok(NearestPointResult::inside(x));
    }
    let d = x.len();
    let proj = |y: &Point| k.gauge_retraction(y);
    let dist = |y: &Point| norm.norm(&(x - proj(y)));
    let mut rng = stream_rng(cfg.seed, 0);
    let mut starts = vec![proj(x), Point::zeros(d)];
    while starts.len() < cfg.starts {
        starts.push(k.sample(&mut rng));
    }
    starts.truncate(cfg.starts);
    let budget = if cfg.iterations == 0 { ellipsoid_budget(d) } else { cfg.iterations };
    let mut answers: Vec<(f64, Point, f64)> = Vec::with_capacity(starts.len());
    let mut iterations = 0;
    for y0 in starts {
        let radius = (x - &y0).norm() + x.norm() + 1e-12;
        let (found, used) = ellipsoid_minimize(
            |y| (norm.norm(&(x - y)), -norm.subgradient(&(x - y))),
            |y| (k.gauge(y) > 1.0).then(|| k.gauge_subgradient(y)),
            &y0,
            radius,
            budget,
        );
        iterations += used;
        let best = found.map_or_else(|| proj(&y0), |f| f.0);
        let scale = dist(&best).max(1e-12);
        let (p1, v1) = pattern_search(dist, &best, 1e-3 * scale, 1e-15 * scale, cfg.polish_evals, &mut rng);
        let (p2, v2) = pattern_search(dist, &p1, 1e-6 * scale, 1e-16 * scale, cfg.polish_evals / 2, &mut rng);
        answers.push((v2, proj(&p2), v1 - v2));
    }
    let (bi, _) = answers
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, a)| if a.0 < b.1 { (i, a.0) } else { b });
    let (value, point, residual) = answers[bi].clone();
    let near = 1e-7 * value.max(1.0);
    let dispersion = answers
        .iter()
        .filter(|a| a.0 <= value + near)
        .map(|a| norm.norm(&(&a.1 - &point)))
        .fold(0.0, f64::max);
    let converged = residual <= 1e-9 * value.max(1.0);
    let mut notes = Vec::new();
    if dispersion > cfg.tie_tol {
        notes.push(format!("non-unique: near-optimal starts differ by {dispersion:e}"));
    }
    if !converged {
        notes.push(format!("not stationary: last polish improved by {residual:e}"));
    }
    Ok(NearestPointResult {
        point,
        distance: value,
        iterations,
        residual,
        converged,
        dispersion,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diamond::{schedule_from_radii, DiamondCompact};
    use crate::norm::PExponent;
    use crate::proximity::fw::nearest_point_fw;
    use crate::space::BlockSpace;

    fn diamond(p: PExponent, r: Vec<f64>) -> DiamondCompact {
        let s = BlockSpace::one_dimensional(r.len(), p).unwrap();
        DiamondCompact::new(s, schedule_from_radii(r).unwrap()).unwrap()
    }

    #[test]
    fn inside_points_are_fixed() {
        let k = diamond(PExponent::Inf, vec![1.0, 0.5]);
        let x = Point::from_vec(vec![0.1, 0.1]);
        let r = nearest_point_general(&x, &k, k.space(), GeneralConfig::default()).unwrap();
        assert_eq!(r.point, x);
    }

    #[test]
    fn agrees_with_frank_wolfe_in_l2() {
        let k = diamond(PExponent::Two, vec![1.0, 0.4, 0.1]);
        let mut rng = stream_rng(3, 0);
        for _ in 0..20 {
            let x = crate::norm::gaussian(3, &mut rng) * 1.5;
            let a = nearest_point_general(&x, &k, k.space(), GeneralConfig::default()).unwrap();
            let b = nearest_point_fw(&x, &k, 10_000).unwrap();
            assert!((&a.point - &b.point).norm() < 1e-6, "{x} {} {} {} {} {:?}", a.point, b.point, a.distance, b.distance, b.note);
        }
    }

    #[test]
    fn l1_ties_are_flagged() {
        // the whole edge from (1, 0) to (0, 1) is at l1 distance 1 from (1, 1)
        let k = diamond(PExponent::One, vec![1.0, 1.0]);
        let x = Point::from_vec(vec![1.0, 1.0]);
        let cfg = GeneralConfig { starts: 8, ..Default::default() };
        let r = nearest_point_general(&x, &k, k.space(), cfg).unwrap();
        assert!((r.distance - 1.0).abs() < 1e-9);
        assert!(k.gauge(&r.point) <= 1.0 + 1e-9);
        assert!(r.note.unwrap().contains("non-unique"));
    }
}
