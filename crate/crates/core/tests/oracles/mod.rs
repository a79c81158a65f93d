//! Independent reference computations for the integration tests.
#![allow(dead_code)]

/// p-norm of a slice, `p` in {1, 2, inf}.
pub fn pnorm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Euclidean projection onto `{y : Σ |y_i|_2 / r_i <= 1}` (blocks of sizes
/// `dims`) by group soft-thresholding: `y_i = x_i (1 - λ / (r_i |x_i|))_+`
/// with `λ` found by bisection.
pub fn group_soft_threshold(x: &[f64], dims: &[usize], r: &[f64]) -> Vec<f64> {
    let mut norms = Vec::new();
    let mut off = 0;
    for &d in dims {
        norms.push(pnorm(&x[off..off + d], 2.0));
        off += d;
    }
    let gauge = |lam: f64| -> f64 { norms.iter().zip(r).map(|(n, ri)| (n - lam / ri).max(0.0) / ri).sum() };
    if gauge(0.0) <= 1.0 {
        return x.to_vec();
    }
    let (mut lo, mut hi) = (0.0, norms.iter().zip(r).map(|(n, ri)| n * ri).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gauge(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lam = hi;
    let mut y = x.to_vec();
    let mut off = 0;
    for (i, &d) in dims.iter().enumerate() {
        let s = if norms[i] > 0.0 { (1.0 - lam / (r[i] * norms[i])).max(0.0) } else { 0.0 };
        for v in &mut y[off..off + d] {
            *v *= s;
        }
        off += d;
    }
    y
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Grid minimum of the Euclidean distance from `x` to the segment or
/// triangle `v0 + a e1 + b e2` (`a, b >= 0`, `a + b <= 1`), grid spacing at
/// most `h` along both edges. Rows in `a` are enumerated; along a row the
/// squared distance is a convex quadratic in `b`, so its grid minimum sits
/// at one of the two grid values around the continuous minimizer.
fn simplex_grid_min(x: &[f64], v: &[Vec<f64>], h: f64) -> f64 {
    let d = x.len();
    let e: Vec<Vec<f64>> = v[1..].iter().map(|w| (0..d).map(|i| w[i] - v[0][i]).collect()).collect();
    let len = |u: &Vec<f64>| u.iter().map(|t| t * t).sum::<f64>().sqrt();
    if e.is_empty() {
        return dist2(x, &v[0]);
    }
    let n1 = (len(&e[0]) / h).ceil().max(1.0) as usize;
    let point = |a: f64, b: f64| -> Vec<f64> {
        (0..d).map(|i| v[0][i] + a * e[0][i] + if e.len() > 1 { b * e[1][i] } else { 0.0 }).collect()
    };
    let mut best = f64::INFINITY;
    for ia in 0..=n1 {
        let a = ia as f64 / n1 as f64;
        if e.len() == 1 {
            best = best.min(dist2(x, &point(a, 0.0)));
            continue;
        }
        let n2 = (len(&e[1]) / h).ceil().max(1.0) as usize;
        let bmax_steps = (((1.0 - a) * n2 as f64) + 1e-9).floor() as i64;
        let base = point(a, 0.0);
        let e2 = &e[1];
        let num: f64 = (0..d).map(|i| (x[i] - base[i]) * e2[i]).sum();
        let den: f64 = e2.iter().map(|t| t * t).sum();
        let bstar = (num / den * n2 as f64).floor() as i64;
        for ib in [bstar, bstar + 1, 0, bmax_steps] {
            let ib = ib.clamp(0, bmax_steps);
            best = best.min(dist2(x, &point(a, ib as f64 / n2 as f64)));
        }
    }
    best
}

/// Grid oracle for the Euclidean distance from `x` to the cross-polytope
/// `conv(±r_i e_i)` (a diamond with one-dimensional blocks), `d <= 3`.
pub fn cross_polytope_distance(x: &[f64], r: &[f64], h: f64) -> f64 {
    let d = x.len();
    if (0..d).map(|i| x[i].abs() / r[i]).sum::<f64>() <= 1.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for signs in 0..(1u32 << d) {
        let v: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut p = vec![0.0; d];
                p[i] = if signs >> i & 1 == 1 { -r[i] } else { r[i] };
                p
            })
            .collect();
        best = best.min(simplex_grid_min(x, &v, h));
    }
    best.sqrt()
}

/// Grid oracle for the distance from `x` in `R^3` to the double cone
/// `conv(r1 [-1, 1] e_1 ∪ r2 B_{span(e_2, e_3)})`, the diamond with blocks `(1, 2)`.
/// Boundary points are `(±r1 (1 - s), s r2 cos θ, s r2 sin θ)`; rows in `s`
/// are enumerated and along a row the distance is unimodal in `θ`.
pub fn double_cone_distance(x: &[f64], r1: f64, r2: f64, h: f64) -> f64 {
    let rho = x[1].hypot(x[2]);
    if x[0].abs() / r1 + rho / r2 <= 1.0 {
        return 0.0;
    }
    let slant = r1.hypot(r2);
    let ns = (slant / h).ceil() as usize;
    let nt = (std::f64::consts::TAU * r2 / h).ceil() as usize;
    let phi = x[2].atan2(x[1]).rem_euclid(std::f64::consts::TAU);
    let k = (phi / std::f64::consts::TAU * nt as f64).floor() as usize;
    let mut best = f64::INFINITY;
    for is in 0..=ns {
        let s = is as f64 / ns as f64;
        for sign in [-1.0, 1.0] {
            for j in [k % nt, (k + 1) % nt] {
                let t = std::f64::consts::TAU * j as f64 / nt as f64;
                let p = [sign * r1 * (1.0 - s), s * r2 * t.cos(), s * r2 * t.sin()];
                best = best.min(dist2(x, &p));
            }
        }
    }
    best.sqrt()
}

/// Grid brute force of the centered inner radius and the height of a
/// diamond with one-dimensional blocks in `R^d`, `d <= 3`, with respect to
/// the coordinate sequence. `K = {y : Σ |y_i| / r_i <= 1}`, ambient p-norm.
/// Returns `(r_n, h_n)` for `n = 1..=d`.
pub fn diamond_grid_radii(r: &[f64], p: f64, h: f64) -> Vec<(f64, f64)> {
    let d = r.len();
    assert!(d <= 3);
    let steps: Vec<i64> = (0..3).map(|i| if i < d { (r[i] / h).ceil() as i64 + 2 } else { 0 }).collect();
    let mut rad = vec![f64::INFINITY; d];
    let mut height = vec![0.0f64; d];
    for a in -steps[0]..=steps[0] {
        for b in -steps[1]..=steps[1] {
            for c in -steps[2]..=steps[2] {
                let idx = [a, b, c];
                let y = [a as f64 * h, b as f64 * h, c as f64 * h];
                let g: f64 = (0..d).map(|i| y[i].abs() / r[i]).sum();
                for n in 1..=d {
                    // inner radius: smallest norm of a grid point of E_n outside K
                    if g > 1.0 && idx[n..d].iter().all(|&k| k == 0) {
                        rad[n - 1] = rad[n - 1].min(pnorm(&y[..d], p));
                    }
                    // height: largest distance to E_n of a grid point of K, the
                    // distance taken as a grid minimum over neighbouring points of E_n
                    if g <= 1.0 && n < d {
                        let mut best = f64::INFINITY;
                        for o in 0..3usize.pow(n as u32) {
                            let mut diff = [0.0; 3];
                            let mut t = o;
                            for i in 0..d {
                                if i < n {
                                    diff[i] = ((t % 3) as f64 - 1.0) * h;
                                    t /= 3;
                                } else {
                                    diff[i] = y[i];
                                }
                            }
                            best = best.min(pnorm(&diff[..d], p));
                        }
                        height[n - 1] = height[n - 1].max(best);
                    }
                }
            }
        }
    }
    rad.into_iter().zip(height).collect()
}
