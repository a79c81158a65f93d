//! Sup-norm blocks carrying a near-Euclidean subspace.
//!
//! Block `n` is `l_inf^{d(n)}` with `Y_n` the image of `R^n` under
//! `c ↦ (f_j · c)_j` for a net `(f_j)` of the Euclidean sphere, so that
//! `(1 - ε) |c|_2 <= |Σ c_i a_i|_inf <= |c|_2` with `a_i` the frame columns.

use crate::error::{invalid, Error, Result};
use crate::linearize::epsnet::{circle_net, epsnet_polyhedral_norm, greedy_sphere_net};
use crate::norm::{euclidean_direction, PExponent, PNorm, Point};
use crate::optim::{ellipsoid_budget, ellipsoid_minimize, pattern_search};
use crate::rng::stream_rng;
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub n: usize,
    /// `d(n) × n`; column `i` is `a_i`.
    pub frame: DMatrix<f64>,
    /// Audited `1 - min_{|c|_2 = 1} |Σ c_i a_i|_inf`.
    pub eps_embed: f64,
}

/// Block `n` built from a net of covering radius `ε`: a single coordinate
/// for `n = 1`, equally spaced directions for `n = 2`, a greedy net for `n = 3, 4`.
pub fn build_block(n: usize, epsilon: f64, seed: u64) -> Result<ModelBlock> {
    crate::smallness::check_epsilon(epsilon)?;
    let net = match n {
        0 => return Err(invalid("block index must be at least 1")),
        1 => vec![Point::from_vec(vec![1.0])],
        2 => {
            let k = (std::f64::consts::PI / (2.0 * (epsilon / 2.0).asin())).ceil() as usize;
            circle_net(k.max(2))
        }
        3 | 4 => greedy_sphere_net(n, epsilon, seed)?,
        _ => return Err(Error::Unsupported(format!("blocks are limited to n <= 4, got {n}"))),
    };
    build_block_from_net(n, net, epsilon, seed)
}

/// Block from an explicit net of unit vectors of `R^n`.
pub fn build_block_from_net(n: usize, net: Vec<Point>, epsilon: f64, seed: u64) -> Result<ModelBlock> {
    if net.iter().any(|f| f.len() != n || (f.norm() - 1.0).abs() > 1e-12) {
        return Err(invalid("net points must be unit vectors of R^n"));
    }
    epsnet_polyhedral_norm(&PNorm::new(PExponent::Two, n), epsilon, Some(net.clone()), seed)?;
    let frame = DMatrix::from_fn(net.len(), n, |j, i| net[j][i]);
    let eps_embed = audit_distortion(&frame, seed);
    Ok(ModelBlock { n, frame, eps_embed })
}

fn audit_distortion(frame: &DMatrix<f64>, seed: u64) -> f64 {
    let n = frame.ncols();
    if n == 1 {
        return 1.0 - frame.amax();
    }
    let f = |c: &Point| (frame * c).amax() / c.norm().max(1e-300);
    let mut rng = stream_rng(seed, 7);
    let mut best = (f64::INFINITY, Point::zeros(n));
    for _ in 0..20_000 {
        let c = euclidean_direction(n, &mut rng);
        let v = f(&c);
        if v < best.0 {
            best = (v, c);
        }
    }
    let (_, v) = pattern_search(f, &best.1, 1e-2, 1e-14, 20_000, &mut rng);
    1.0 - v.min(best.0)
}

impl ModelBlock {
    /// `d(n)`.
    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    /// `Σ c_i a_i`.
    pub fn embed(&self, c: &Point) -> Point {
        &self.frame * c
    }

    /// Least-squares frame coefficients of `x`.
    pub(crate) fn coefficients(&self, x: &Point) -> Point {
        self.frame.clone().svd(true, true).solve(x, 1e-14).expect("svd with vectors")
    }
}

/// `min_{|c|_2 <= 1} |x - Σ c_i a_i|_inf`, an upper estimate attained by a
/// feasible `c`.
pub fn dist_to_euclidean_ball(x: &Point, block: &ModelBlock) -> f64 {
    assert_eq!(x.len(), block.dim(), "point outside the block");
    let n = block.n;
    let value = |c: &Point| (x - block.embed(c)).amax();
    let mut c0 = block.coefficients(x);
    let cn = c0.norm();
    if cn > 1.0 {
        c0 /= cn;
    }
    let v0 = value(&c0);
    if v0 <= 1e-15 * (1.0 + x.amax()) {
        return v0;
    }
    let (found, _) = ellipsoid_minimize(
        |c| {
            let r = x - block.embed(c);
            let j = r.iamax();
            let mut e = Point::zeros(r.len());
            e[j] = r[j].signum();
            (r[j].abs(), -(block.frame.transpose() * e))
        },
        |c| {
            let m = c.norm();
            (m > 1.0).then(|| c / m)
        },
        &Point::zeros(n),
        1.0 + 1e-9,
        ellipsoid_budget(n),
    );
    found.map_or(v0, |f| f.1.min(v0))
}
