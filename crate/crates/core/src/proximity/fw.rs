//! Away-step Frank-Wolfe for Euclidean nearest points in a diamond compact.

use super::NearestPointResult;
use crate::convex::ConvexBody;
use crate::diamond::DiamondCompact;
use crate::error::{invalid, Error, Result};
use crate::norm::Point;
use nalgebra::{DMatrix, DVector};

/// Duality gap required of a converged Frank-Wolfe answer.
pub const FW_GAP_TOL: f64 = 1e-8;

/// A minimizer of a linear functional over `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub point: Point,
    /// Block carrying the vertex; `None` when the functional vanishes.
    pub block: Option<usize>,
}

/// `argmin_{y in K} <g, y>`: the block `k` maximizing `r_k |g_k|_*`, at
/// `-r_k` times a norming point of `g_k`. Ties go to the lowest block.
pub fn lmo_diamond(g: &Point, k: &DiamondCompact) -> Result<Vertex> {
    let space = k.space();
    space.check(g)?;
    let mut best: Option<(f64, usize)> = None;
    for i in 1..=k.depth() {
        let gi = space.block_slice(g, i);
        let dual = space.blocks()[i - 1]
            .norm
            .dual(gi)
            .ok_or_else(|| Error::Unsupported(format!("no dual norm for block {i}")))?;
        let score = k.radius(i) * dual;
        if score > best.map_or(0.0, |b| b.0) {
            best = Some((score, i));
        }
    }
    let Some((_, i)) = best else {
        return Ok(Vertex { point: Point::zeros(space.total_dim()), block: None });
    };
    let gi = space.block_slice(g, i);
    let u = space.blocks()[i - 1]
        .norm
        .norming_point(gi)
        .ok_or_else(|| Error::Unsupported(format!("no norming point for block {i}")))?;
    let mut point = Point::zeros(space.total_dim());
    for (c, v) in space.block_range(i).zip(u) {
        point[c] = -k.radius(i) * v;
    }
    Ok(Vertex { point, block: Some(i) })
}

/// Nearest point of `K` to `x` in the Euclidean model, by away-step
/// Frank-Wolfe on `½|x - y|²` with exact line search and a periodic
/// projection onto the affine hull of the active vertices.
pub fn nearest_point_fw(x: &Point, k: &DiamondCompact, iters: usize) -> Result<NearestPointResult> {
    if !k.space().is_euclidean_model() {
        return Err(Error::Unsupported(
            "Frank-Wolfe needs the Euclidean model; use nearest_point_general".into(),
        ));
    }
    if iters == 0 {
        return Err(invalid("iters must be at least 1"));
    }
    k.space().check(x)?;
    if k.gauge(x) <= 1.0 {
        return Ok(NearestPointResult::inside(x));
    }
    let mut atoms: Vec<Point> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let first = lmo_diamond(&-x, k)?.point;
    let mut y = first.clone();
    atoms.push(first);
    weights.push(1.0);
    let mut gap = f64::INFINITY;
    let mut it = 0;
    while it < iters {
        it += 1;
        let grad = &y - x;
        let s = lmo_diamond(&grad, k)?.point;
        gap = grad.dot(&(&y - &s));
        if gap <= FW_GAP_TOL {
            break;
        }
        let (away, _) = atoms
            .iter()
            .enumerate()
            .map(|(j, a)| (j, grad.dot(a)))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        let d_fw = &s - &y;
        let d_aw = &y - &atoms[away];
        let fw_step = -grad.dot(&d_fw) >= -grad.dot(&d_aw) || atoms.len() == 1;
        let (d, gmax) = if fw_step {
            (d_fw, 1.0)
        } else {
            let a = weights[away];
            (d_aw, a / (1.0 - a))
        };
        let dd = d.norm_squared();
        if dd == 0.0 {
            break;
        }
        let gamma = (-grad.dot(&d) / dd).clamp(0.0, gmax);
        y += &d * gamma;
        if fw_step {
            for w in weights.iter_mut() {
                *w *= 1.0 - gamma;
            }
            match atoms.iter().position(|a| (a - &s).amax() <= 1e-15) {
                Some(j) => weights[j] += gamma,
                None => {
                    atoms.push(s);
                    weights.push(gamma);
                }
            }
        } else {
            for w in weights.iter_mut() {
                *w *= 1.0 + gamma;
            }
            weights[away] -= gamma;
        }
        prune(&mut atoms, &mut weights);
        if it % 10 == 0 {
            polish(x, &mut y, &mut atoms, &mut weights);
        }
    }
    if gap > FW_GAP_TOL {
        polish(x, &mut y, &mut atoms, &mut weights);
        let grad = &y - x;
        let s = lmo_diamond(&grad, k)?.point;
        gap = grad.dot(&(&y - &s));
    }
    let converged = gap <= FW_GAP_TOL;
    Ok(NearestPointResult {
        distance: (x - &y).norm(),
        point: y,
        iterations: it,
        residual: gap.max(0.0),
        converged,
        dispersion: 0.0,
        note: (!converged).then(|| format!("duality gap {gap:e} after {it} iterations")),
    })
}

fn prune(atoms: &mut Vec<Point>, weights: &mut Vec<f64>) {
    let mut j = 0;
    while j < atoms.len() {
        if weights[j] <= 1e-15 {
            atoms.swap_remove(j);
            weights.swap_remove(j);
        } else {
            j += 1;
        }
    }
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

/// Replace `y` by the nearest point to `x` on the affine hull of the
/// active vertices when that point lies in their convex hull.
fn polish(x: &Point, y: &mut Point, atoms: &mut [Point], weights: &mut Vec<f64>) {
    let m = atoms.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    let mut rhs = DVector::zeros(m + 1);
    for i in 0..m {
        for j in 0..m {
            kkt[(i, j)] = atoms[i].dot(&atoms[j]);
        }
        kkt[(i, m)] = 1.0;
        kkt[(m, i)] = 1.0;
        rhs[i] = atoms[i].dot(x);
    }
    rhs[m] = 1.0;
    let Some(sol) = kkt.lu().solve(&rhs) else {
        return;
    };
    let w: Vec<f64> = (0..m).map(|i| sol[i]).collect();
    if w.iter().any(|v| !(*v >= 0.0)) {
        return;
    }
    let mut z = Point::zeros(x.len());
    for (a, wi) in atoms.iter().zip(&w) {
        z += a * *wi;
    }
    if (x - &z).norm_squared() <= (x - &*y).norm_squared() {
        *y = z;
        *weights = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diamond::schedule_from_radii;
    use crate::norm::PExponent;
    use crate::space::BlockSpace;

    fn k2(r: Vec<f64>) -> DiamondCompact {
        let s = BlockSpace::one_dimensional(r.len(), PExponent::Two).unwrap();
        DiamondCompact::new(s, schedule_from_radii(r).unwrap()).unwrap()
    }

    fn p(v: &[f64]) -> Point {
        Point::from_column_slice(v)
    }

    #[test]
    fn lmo_examples() {
        let k = k2(vec![1.0, 0.25]);
        assert_eq!(lmo_diamond(&p(&[1.0, -3.0]), &k).unwrap().point, p(&[-1.0, 0.0]));
        assert_eq!(lmo_diamond(&p(&[0.0, 2.0]), &k).unwrap().point, p(&[0.0, -0.25]));
        let z = lmo_diamond(&p(&[0.0, 0.0]), &k).unwrap();
        assert!(z.block.is_none());
        let k1 = k2(vec![1.0, 1.0]);
        assert_eq!(lmo_diamond(&p(&[0.0, 1.0]), &k1).unwrap().point, p(&[0.0, -1.0]));
    }

    #[test]
    fn lmo_matches_vertex_enumeration() {
        let k = k2(vec![1.0, 0.3, 0.05]);
        let verts: Vec<Point> = (0..3)
            .flat_map(|i| {
                [1.0, -1.0].map(|s| {
                    let mut v = Point::zeros(3);
                    v[i] = s * k.radius(i + 1);
                    v
                })
            })
            .collect();
        let mut rng = crate::rng::stream_rng(4, 0);
        for _ in 0..200 {
            let g = crate::norm::gaussian(3, &mut rng);
            let best = verts.iter().map(|v| g.dot(v)).fold(f64::INFINITY, f64::min);
            let got = lmo_diamond(&g, &k).unwrap().point;
            assert!((g.dot(&got) - best).abs() < 1e-15);
        }
    }

    #[test]
    fn fw_examples() {
        let k = k2(vec![1.0, 1.0]);
        let a = nearest_point_fw(&p(&[2.0, 0.0]), &k, 1000).unwrap();
        assert!((a.point - p(&[1.0, 0.0])).amax() < 1e-12);
        let b = nearest_point_fw(&p(&[1.0, 1.0]), &k, 1000).unwrap();
        assert!((b.point - p(&[0.5, 0.5])).amax() < 1e-9);
        assert!(b.converged && b.residual <= FW_GAP_TOL);
        let c = nearest_point_fw(&p(&[0.2, -0.3]), &k, 10).unwrap();
        assert_eq!(c.distance, 0.0);
    }

    #[test]
    fn non_euclidean_is_rejected() {
        let s = BlockSpace::one_dimensional(2, PExponent::Inf).unwrap();
        let k = DiamondCompact::new(s, schedule_from_radii(vec![1.0, 0.5]).unwrap()).unwrap();
        assert!(matches!(nearest_point_fw(&p(&[2.0, 0.0]), &k, 10), Err(Error::Unsupported(_))));
    }
}
