//! Small derivative-free minimizers used by the geometric searches.

use crate::norm::{euclidean_direction, Norm, Point};
use crate::rng::SimRng;
use nalgebra::DMatrix;

/// Compass search with extra random directions. Minimizes `f` from `x0`,
/// halving the step when no direction improves. Returns the best point and
/// value.
pub fn pattern_search<F>(f: F, x0: &Point, step: f64, min_step: f64, max_evals: usize, rng: &mut SimRng) -> (Point, f64)
where
    F: Fn(&Point) -> f64,
{
    let d = x0.len();
    let mut x = x0.clone();
    let mut fx = f(&x);
    let mut h = step;
    let mut evals = 1;
    while h > min_step && evals < max_evals {
        let mut improved = false;
        let mut dirs: Vec<Point> = (0..d)
            .map(|i| {
                let mut e = Point::zeros(d);
                e[i] = 1.0;
                e
            })
            .collect();
        dirs.extend((0..d.max(2)).map(|_| euclidean_direction(d, rng)));
        for dir in dirs {
            for s in [1.0, -1.0] {
                let y = &x + &dir * (s * h);
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
            if improved {
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (x, fx)
}

/// Largest `t >= 0` with `inside(t)`, for a predicate that holds on an
/// initial interval. The bracket starts at `t0` and is doubled until the
/// predicate fails (at most 60 times); returns `f64::INFINITY` if it never fails.
pub fn bisect_ray<F>(inside: F, t0: f64, rel_tol: f64) -> f64
where
    F: Fn(f64) -> bool,
{
    if !inside(0.0) {
        return 0.0;
    }
    let mut hi = t0;
    let mut lo = 0.0;
    let mut grown = 0;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        grown += 1;
        if grown > 60 {
            return f64::INFINITY;
        }
    }
    while hi - lo > rel_tol * hi.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    lo
}

/// `min_c |x - B c|` over the column span of `basis`. Exact least squares for
/// the Euclidean norm; otherwise the least-squares point refined by pattern
/// search.
pub fn distance_to_span(norm: &dyn Norm, x: &Point, basis: &DMatrix<f64>, rng: &mut SimRng) -> f64 {
    if basis.ncols() == 0 {
        return norm.norm(x);
    }
    let svd = basis.clone().svd(true, true);
    let c0 = svd.solve(x, 1e-12).expect("svd with both factors");
    if norm.is_euclidean() {
        return norm.norm(&(x - basis * &c0));
    }
    let scale = norm.norm(x).max(1e-300);
    let (_, v) = pattern_search(|c| norm.norm(&(x - basis * c)), &c0, scale * 0.25, scale * 1e-12, 20_000, rng);
    v
}

/// Central-cut ellipsoid method for `min f` over a convex set. `objective`
/// returns a value and a subgradient; `constraint` returns a cut normal at
/// infeasible points and `None` at feasible ones. Starts from the Euclidean
/// ball `B(center, radius)`, which must contain a minimizer. Returns the best
/// feasible center (if any) and the number of cuts.
pub fn ellipsoid_minimize<O, C>(objective: O, constraint: C, center: &Point, radius: f64, budget: usize) -> (Option<(Point, f64)>, usize)
where
    O: Fn(&Point) -> (f64, Point),
    C: Fn(&Point) -> Option<Point>,
{
    let d = center.len();
    let nf = d as f64;
    let mut c = center.clone();
    let mut p = DMatrix::<f64>::identity(d, d) * (radius * radius);
    let mut best: Option<(Point, f64)> = None;
    let mut used = 0;
    for _ in 0..budget {
        used += 1;
        let g = match constraint(&c) {
            Some(cut) => cut,
            None => {
                let (v, g) = objective(&c);
                if best.as_ref().is_none_or(|b| v < b.1) {
                    best = Some((c.clone(), v));
                }
                g
            }
        };
        let pg = &p * &g;
        let gpg = g.dot(&pg);
        if !(gpg > 0.0) || !gpg.is_finite() {
            break;
        }
        let b = pg / gpg.sqrt();
        if d == 1 {
            c -= &b * 0.5;
            p *= 0.25;
        } else {
            c -= &b / (nf + 1.0);
            p = (&p - (&b * b.transpose()) * (2.0 / (nf + 1.0))) * (nf * nf / (nf * nf - 1.0));
            p = (&p + p.transpose()) * 0.5;
        }
        if p.diagonal().max().sqrt() < 1e-15 * radius {
            break;
        }
    }
    (best, used)
}

/// Default cut budget for [`ellipsoid_minimize`] in dimension `d`.
pub fn ellipsoid_budget(d: usize) -> usize {
    60 * d * (d + 1) + 200
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};
    use crate::rng::stream_rng;

    #[test]
    fn pattern_search_finds_l1_minimum() {
        let mut rng = stream_rng(0, 0);
        let target = Point::from_vec(vec![0.3, -0.7]);
        let (x, v) = pattern_search(|y| (y - &target).abs().sum(), &Point::zeros(2), 1.0, 1e-12, 10_000, &mut rng);
        assert!(v < 1e-10);
        assert!((x - target).amax() < 1e-10);
    }

    #[test]
    fn bisection_on_interval() {
        let t = bisect_ray(|t| t <= 0.75, 0.1, 1e-14);
        assert!((t - 0.75).abs() < 1e-13);
        assert_eq!(bisect_ray(|t| t < 0.0, 1.0, 1e-9), 0.0);
        assert_eq!(bisect_ray(|_| true, 1.0, 1e-9), f64::INFINITY);
    }

    #[test]
    fn distance_to_axis() {
        let mut rng = stream_rng(0, 1);
        let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let x = Point::from_vec(vec![5.0, -2.0]);
        for p in [PExponent::One, PExponent::Two, PExponent::Inf] {
            let d = distance_to_span(&PNorm::new(p, 2), &x, &basis, &mut rng);
            assert!((d - 2.0).abs() < 1e-9);
        }
        // l_inf distance from (1, 1) to span{(1, -1)} is 1
        let b2 = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let d = distance_to_span(&PNorm::new(PExponent::Inf, 2), &Point::from_vec(vec![1.0, 1.0]), &b2, &mut rng);
        assert!((d - 1.0).abs() < 1e-9);
    }
}
