//! Polyhedral norms from ε-nets of the dual sphere.
//!
//! If `(f_j)` is an ε-net of the dual unit sphere then `|x| = max_j |f_j(x)|`
//! satisfies `(1 - ε) |x|_X <= |x| <= |x|_X`, so `x ↦ (f_j(x))_j` embeds `X`
//! into `l_inf^N` with distortion `1 / (1 - ε)`. A greedy net of the sphere
//! has at most `[(1 + 2/ε)^n]` points.

use crate::error::{invalid, Error, Result};
use crate::norm::{euclidean_direction, Norm, Point, TableNorm};
use crate::rng::stream_rng;
use crate::smallness::{check_epsilon, phi};

/// `[(1 + 2/ε)^n]`, the size bound of an ε-net of the unit sphere of `R^n`.
pub fn net_size_bound(n: usize, epsilon: f64) -> Result<u64> {
    phi(n, epsilon)
}

/// `k` equally spaced unit vectors of the plane.
pub fn circle_net(k: usize) -> Vec<Point> {
    (0..k)
        .map(|j| {
            let t = std::f64::consts::TAU * j as f64 / k as f64;
            Point::from_vec(vec![t.cos(), t.sin()])
        })
        .collect()
}

/// Greedy `ε`-net of the Euclidean unit sphere of `R^dim`, for `dim <= 4`.
/// Candidates are the coordinate vectors followed by random directions; a
/// candidate joins the net when it is farther than `ε` from every member.
/// Runs until a fresh batch of probes is fully covered.
pub fn greedy_sphere_net(dim: usize, epsilon: f64, seed: u64) -> Result<Vec<Point>> {
    check_epsilon(epsilon)?;
    if dim == 0 || dim > 4 {
        return Err(Error::Unsupported(format!("greedy sphere nets are limited to dims 1..=4, got {dim}")));
    }
    let mut rng = stream_rng(seed, 0);
    let mut net: Vec<Point> = Vec::new();
    let covered = |net: &[Point], u: &Point| net.iter().any(|v| (v - u).norm() <= epsilon);
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = Point::zeros(dim);
            e[i] = s;
            if !covered(&net, &e) {
                net.push(e);
            }
        }
    }
    let batch = 4000 * dim;
    loop {
        let mut added = false;
        for _ in 0..batch {
            let u = euclidean_direction(dim, &mut rng);
            if !covered(&net, &u) {
                net.push(u);
                added = true;
            }
        }
        if !added {
            return Ok(net);
        }
    }
}

/// Build `|x| = max_j |f_j(x)|` from a net of unit functionals and verify
/// `(1 - ε)|x|_X <= |x| <= |x|_X` on sampled points. Without a net the base
/// norm must be Euclidean and a greedy net is used.
pub fn epsnet_polyhedral_norm(base: &dyn Norm, epsilon: f64, net: Option<Vec<Point>>, seed: u64) -> Result<TableNorm> {
    check_epsilon(epsilon)?;
    let dim = base.dim();
    let net = match net {
        Some(n) => n,
        None if base.is_euclidean() => greedy_sphere_net(dim, epsilon, seed)?,
        None => return Err(Error::Unsupported("automatic nets need a Euclidean base norm".into())),
    };
    if net.iter().any(|f| f.len() != dim) {
        return Err(invalid("net functionals have the wrong dimension"));
    }
    let table = TableNorm::new(net.iter().map(|f| f.as_slice().to_vec()).collect())?;
    let mut rng = stream_rng(seed, 1);
    let mut probes: Vec<Point> = Vec::new();
    if let Some(vs) = base.unit_ball_vertices() {
        probes.extend(vs);
    }
    probes.extend((0..20_000).map(|_| euclidean_direction(dim, &mut rng)));
    for x in probes {
        let nx = base.norm(&x);
        let tx = table.norm(&x);
        if tx > nx * (1.0 + 1e-12) || tx < (1.0 - epsilon) * nx * (1.0 - 1e-12) {
            return Err(Error::Witness {
                what: format!("sandwich violated: |x| = {tx}, |x|_X = {nx}"),
                witness: x.as_slice().to_vec(),
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};

    #[test]
    fn size_bound_examples() {
        assert_eq!(net_size_bound(2, 1.0).unwrap(), 9);
    }

    #[test]
    fn l_inf_coordinates_are_exact() {
        let base = PNorm::new(PExponent::Inf, 3);
        let net = (0..3)
            .map(|i| Point::from_fn(3, |j, _| if i == j { 1.0 } else { 0.0 }))
            .collect();
        let t = epsnet_polyhedral_norm(&base, 0.5, Some(net), 0).unwrap();
        let x = Point::from_vec(vec![0.3, -2.0, 1.0]);
        assert_eq!(t.norm(&x), base.norm(&x));
    }

    #[test]
    fn circle_of_eight_sandwiches_l2() {
        let base = PNorm::new(PExponent::Two, 2);
        let t = epsnet_polyhedral_norm(&base, 0.5, Some(circle_net(8)), 0).unwrap();
        for k in 0..1000 {
            let a = std::f64::consts::TAU * k as f64 / 1000.0;
            let x = Point::from_vec(vec![a.cos(), a.sin()]);
            let v = t.norm(&x);
            assert!((0.5..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn coarse_net_is_rejected() {
        let base = PNorm::new(PExponent::Two, 2);
        let e = epsnet_polyhedral_norm(&base, 0.05, Some(circle_net(4)), 0).unwrap_err();
        assert!(matches!(e, Error::Witness { .. }));
    }

    #[test]
    fn greedy_nets_respect_size_bound() {
        for (dim, eps) in [(2, 0.5), (3, 0.5), (2, 0.2)] {
            let net = greedy_sphere_net(dim, eps, 1).unwrap();
            assert!(net.len() as u64 <= net_size_bound(dim, eps).unwrap());
            epsnet_polyhedral_norm(&PNorm::new(PExponent::Two, dim), eps, Some(net), 2).unwrap();
        }
        assert!(greedy_sphere_net(5, 0.5, 0).is_err());
    }
}
