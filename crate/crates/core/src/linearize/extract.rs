//! Projections `P̃ = (P|_E)^{-1} P` from averaged derivatives.

use crate::norm::{Norm, Point};
use crate::optim::pattern_search;
use crate::rng::stream_rng;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Tolerance of the projection identities.
pub const PROJECTION_TOL: f64 = 1e-6;

/// Operator norm of `m` from `(R^cols, dom)` to `(R^rows, cod)`, with the
/// method used: `vertices` (exact, polyhedral domain), `svd` (exact,
/// Euclidean on both sides) or `sampled` (lower estimate).
pub fn operator_norm(m: &DMatrix<f64>, dom: &dyn Norm, cod: &dyn Norm, seed: u64) -> (f64, &'static str) {
    if let Some(vs) = dom.unit_ball_vertices() {
        let v = vs.iter().map(|v| cod.norm(&(m * v))).fold(0.0, f64::max);
        return (v, "vertices");
    }
    if dom.is_euclidean() && cod.is_euclidean() {
        let s = m.singular_values();
        return (s.iter().cloned().fold(0.0, f64::max), "svd");
    }
    let mut rng = stream_rng(seed, 0);
    let ratio = |x: &Point| {
        let n = dom.norm(x);
        if n > 0.0 {
            cod.norm(&(m * x)) / n
        } else {
            0.0
        }
    };
    let mut best = (0.0, Point::zeros(m.ncols()));
    for _ in 0..4000 {
        let x = dom.sample_unit_ball(&mut rng);
        let r = ratio(&x);
        if r > best.0 {
            best = (r, x);
        }
    }
    let (_, v) = pattern_search(|x| -ratio(x), &best.1, 0.1, 1e-10, 20_000, &mut rng);
    (best.0.max(-v), "sampled")
}

/// The ambient norm seen through a frame: `c ↦ |Σ c_i a_i|`.
pub struct FrameNorm<'a> {
    pub ambient: &'a dyn Norm,
    pub frame: DMatrix<f64>,
}

impl Norm for FrameNorm<'_> {
    fn dim(&self) -> usize {
        self.frame.ncols()
    }
    fn norm(&self, x: &Point) -> f64 {
        self.ambient.norm(&(&self.frame * x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCertificate {
    pub sigma: usize,
    pub frame_dim: usize,
    /// Row-major `g × g` matrix of `P̃` in frame coordinates, if extraction succeeded.
    pub matrix: Option<Vec<Vec<f64>>>,
    pub norm_estimate: f64,
    pub norm_method: String,
    pub lipschitz: f64,
    pub bound_4l: f64,
    /// `8L / (1 - ε)`; absent when `ε = 1`.
    pub bound_8l: Option<f64>,
    /// The same bounds with `L` replaced by `1.25 L`.
    pub bound_4l_margin: f64,
    pub bound_8l_margin: Option<f64>,
    /// `|P|_E - I|` on `E`; at most one half in the regime of the construction.
    pub half_condition: f64,
    /// Largest entry of `P` outside the `E` rows.
    pub leak: f64,
    pub identity_residual: f64,
    pub idempotency_residual: f64,
    pub invertible: bool,
    pub pass_projection: bool,
    pub pass_4l: bool,
    pub pass_8l: bool,
    pub diagnostics: Vec<String>,
}

impl ProjectionCertificate {
    pub fn pass(&self) -> bool {
        self.pass_projection && self.pass_4l && self.pass_8l
    }
}

/// Extract `P̃ = (P|_E)^{-1} P` from the averaged operator `avg` (frame
/// coordinates, `E` spanned by the first `σ` frame vectors) and certify it
/// against `4L + tol` and `8L/(1 - ε) + tol`.
pub fn extract_projection(
    avg: &DMatrix<f64>,
    sigma: usize,
    frame_norm: &dyn Norm,
    lipschitz: f64,
    epsilon: f64,
    tol: f64,
) -> ProjectionCertificate {
    let g = avg.ncols();
    assert!(sigma >= 1 && sigma <= g && avg.nrows() == g && frame_norm.dim() == g);
    let mut diagnostics = Vec::new();
    let p = avg.rows(0, sigma).into_owned();
    let leak = if sigma < g { avg.rows(sigma, g - sigma).amax() } else { 0.0 };
    if leak > PROJECTION_TOL {
        diagnostics.push(format!("averaged operator leaves E: largest off-E entry {leak:e}"));
    }
    let restricted = p.columns(0, sigma).into_owned();
    let e_norm = SubNorm { norm: frame_norm, sigma, g };
    let defect = &restricted - DMatrix::<f64>::identity(sigma, sigma);
    let (half_condition, _) = operator_norm(&defect, &e_norm, &e_norm, 11);
    if half_condition > 0.5 {
        diagnostics.push(format!("|P|_E - I| = {half_condition:.3e} exceeds 1/2"));
    }
    let bound_8 = |l: f64| (epsilon < 1.0).then(|| 8.0 * l / (1.0 - epsilon));
    let mut cert = ProjectionCertificate {
        sigma,
        frame_dim: g,
        matrix: None,
        norm_estimate: f64::NAN,
        norm_method: String::new(),
        lipschitz,
        bound_4l: 4.0 * lipschitz,
        bound_8l: bound_8(lipschitz),
        bound_4l_margin: 5.0 * lipschitz,
        bound_8l_margin: bound_8(1.25 * lipschitz),
        half_condition,
        leak,
        identity_residual: f64::NAN,
        idempotency_residual: f64::NAN,
        invertible: false,
        pass_projection: false,
        pass_4l: false,
        pass_8l: false,
        diagnostics,
    };
    let sv = restricted.singular_values();
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let inverse = if smin > 1e-12 * smax.max(1e-300) { restricted.clone().try_inverse() } else { None };
    let Some(inv) = inverse else {
        cert.diagnostics.push(format!("P|_E is singular (smallest singular value {smin:e})"));
        return cert;
    };
    cert.invertible = true;
    let core = &inv * &p;
    let mut pt = DMatrix::zeros(g, g);
    pt.rows_mut(0, sigma).copy_from(&core);
    let mut id_res = 0.0f64;
    for i in 0..sigma {
        let mut e = Point::zeros(g);
        e[i] = 1.0;
        id_res = id_res.max(frame_norm.norm(&(&pt * &e - &e)));
    }
    let (idem, _) = operator_norm(&(&pt * &pt - &pt), frame_norm, frame_norm, 12);
    let (norm, method) = operator_norm(&pt, frame_norm, frame_norm, 13);
    cert.identity_residual = id_res;
    cert.idempotency_residual = idem;
    cert.norm_estimate = norm;
    cert.norm_method = method.into();
    cert.pass_projection = id_res <= PROJECTION_TOL && idem <= PROJECTION_TOL;
    cert.pass_4l = norm <= cert.bound_4l + tol;
    cert.pass_8l = cert.bound_8l.is_none_or(|b| 2.0 * norm / (1.0 - epsilon) <= b + tol);
    cert.matrix = Some((0..g).map(|i| pt.row(i).iter().cloned().collect()).collect());
    cert
}

/// The frame norm restricted to the first `σ` coordinates.
struct SubNorm<'a> {
    norm: &'a dyn Norm,
    sigma: usize,
    g: usize,
}

impl SubNorm<'_> {
    fn pad(&self, x: &Point) -> Point {
        let mut y = Point::zeros(self.g);
        y.rows_mut(0, self.sigma).copy_from(x);
        y
    }
}

impl Norm for SubNorm<'_> {
    fn dim(&self) -> usize {
        self.sigma
    }
    fn norm(&self, x: &Point) -> f64 {
        self.norm.norm(&self.pad(x))
    }
    fn unit_ball_vertices(&self) -> Option<Vec<Point>> {
        // vertices of a coordinate section of a coordinate l1/l_inf ball
        let vs = self.norm.unit_ball_vertices()?;
        let mut out: Vec<Point> = vs
            .into_iter()
            .filter(|v| v.rows(self.sigma, self.g - self.sigma).iter().all(|&a| a == 0.0))
            .map(|v| v.rows(0, self.sigma).into_owned())
            .collect();
        if out.is_empty() {
            // cube: sections through the origin are cubes of their own
            out = crate::norm::coordinate_ball_vertices(crate::norm::PExponent::Inf, self.sigma)?;
            if out.iter().any(|v| (self.norm(v) - 1.0).abs() > 1e-12) {
                return None;
            }
        }
        Some(out)
    }
    fn is_euclidean(&self) -> bool {
        self.norm.is_euclidean()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};

    #[test]
    fn coordinate_projection_passes_through() {
        let n = PNorm::new(PExponent::Inf, 3);
        let mut avg = DMatrix::zeros(3, 3);
        avg[(0, 0)] = 1.0;
        avg[(1, 1)] = 1.0;
        let c = extract_projection(&avg, 2, &n, 1.0, 0.5, 0.1);
        assert!(c.pass());
        assert_eq!(c.norm_estimate, 1.0);
        assert_eq!(c.norm_method, "vertices");
        let m = c.matrix.unwrap();
        assert_eq!(m[0], vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn existing_projection_is_kept() {
        let n = PNorm::new(PExponent::Two, 2);
        let avg = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.0]);
        let c = extract_projection(&avg, 1, &n, 1.0, 0.5, 0.1);
        assert!(c.pass_projection);
        assert_eq!(c.matrix.unwrap()[0], vec![1.0, 0.5]);
        assert!((c.norm_estimate - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singular_restriction_fails_with_diagnostics() {
        let n = PNorm::new(PExponent::One, 2);
        let avg = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let c = extract_projection(&avg, 1, &n, 1.0, 0.5, 0.1);
        assert!(!c.invertible && !c.pass());
        assert!(!c.diagnostics.is_empty());
    }

    #[test]
    fn rescaled_restriction_is_inverted() {
        // P|_E = 0.8 I on E: P̃ undoes the shrinkage
        let n = PNorm::new(PExponent::Inf, 3);
        let avg = DMatrix::from_row_slice(3, 3, &[0.8, 0.0, 0.1, 0.0, 0.8, 0.0, 0.0, 0.0, 0.0]);
        let c = extract_projection(&avg, 2, &n, 1.0, 0.5, 0.1);
        assert!(c.pass_projection);
        assert!((c.norm_estimate - 1.125).abs() < 1e-12);
        assert!((c.half_condition - 0.2).abs() < 1e-12);
    }
}
