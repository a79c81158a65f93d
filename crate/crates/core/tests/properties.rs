mod oracles;

use lipretract::convex::ConvexBody;
use lipretract::diamond::{schedule_for_delta, schedule_from_radii, DiamondCompact};
use lipretract::norm::{Norm, PExponent, Point};
use lipretract::proximity::nearest_point_fw;
use lipretract::space::BlockSpace;
use proptest::prelude::*;

fn euclidean(dims: &[usize], radii: &[f64]) -> DiamondCompact {
    let s = BlockSpace::uniform(dims, PExponent::Two, PExponent::Two).unwrap();
    DiamondCompact::new(s, schedule_from_radii(radii.to_vec()).unwrap()).unwrap()
}

/// Block sizes, strictly decreasing radii and a query point.
fn model() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>)> {
    prop::collection::vec(1usize..=3, 1..=4).prop_flat_map(|dims| {
        let n = dims.len();
        let d: usize = dims.iter().sum();
        (Just(dims), prop::collection::vec(0.2f64..0.9, n), prop::collection::vec(-2.0f64..2.0, d))
    })
    .prop_map(|(dims, q, x)| {
        let mut r = Vec::with_capacity(q.len());
        let mut cur = 1.0;
        for f in q {
            r.push(cur);
            cur *= f;
        }
        (dims, r, x)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frank_wolfe_matches_group_soft_threshold((dims, r, x) in model()) {
        let k = euclidean(&dims, &r);
        let x = Point::from_vec(x);
        let fw = nearest_point_fw(&x, &k, 20_000).unwrap();
        let want = oracles::group_soft_threshold(x.as_slice(), &dims, &r);
        let err = fw.point.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(fw.converged);
        prop_assert!(err <= 1e-6, "fw {} oracle {:?}", fw.point, want);
    }

    #[test]
    fn retraction_fixes_k_and_lands_in_k(
        (dims, _r, x) in model(),
        p in prop::sample::select(vec![PExponent::One, PExponent::Two, PExponent::Inf]),
        b in prop::sample::select(vec![PExponent::One, PExponent::Two, PExponent::Inf]),
    ) {
        let s = BlockSpace::uniform(&dims, b, p).unwrap();
        let k = DiamondCompact::new(s, schedule_for_delta(0.5, dims.len(), None).unwrap()).unwrap();
        let x = Point::from_vec(x);
        let y = k.retract(&x);
        prop_assert!(k.gauge(&y) <= 1.0 + 1e-9);
        if k.gauge(&x) <= 1.0 {
            prop_assert_eq!(y, x);
        } else {
            // y sits on the boundary, where the gauge is exact only up to rounding
            prop_assert!((k.retract(&y) - &y).amax() <= 1e-12);
        }
    }

    #[test]
    fn gauge_is_a_norm_up_to_scaling((dims, r, x) in model(), t in 0.0f64..5.0, seed in 0u64..1000) {
        let k = euclidean(&dims, &r);
        let x = Point::from_vec(x);
        let g = k.gauge(&x);
        prop_assert!((k.gauge(&(&x * t)) - t * g).abs() <= 1e-12 * (1.0 + t * g));
        let mut rng = lipretract::rng::stream_rng(seed, 0);
        let y = k.space().sample_unit_ball(&mut rng);
        prop_assert!(k.gauge(&(&x + &y)) <= g + k.gauge(&y) + 1e-12);
        // closed form sum |x_i|_2 / r_i
        let mut off = 0;
        let mut closed = 0.0;
        for (i, &d) in dims.iter().enumerate() {
            closed += x.as_slice()[off..off + d].iter().map(|v| v * v).sum::<f64>().sqrt() / r[i];
            off += d;
        }
        prop_assert!((g - closed).abs() <= 1e-12 * (1.0 + g));
    }
}

/// Unit vectors of a block: the two signs in dimension one, a fine polygon in
/// dimension two (Euclidean block norm).
fn block_sphere(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..720)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / 720.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
    }
}

/// Generators `r_i u` of the hull, as points of the whole space.
fn generators(dims: &[usize], r: &[f64]) -> Vec<Point> {
    let total: usize = dims.iter().sum();
    let mut out = Vec::new();
    let mut off = 0;
    for (i, &d) in dims.iter().enumerate() {
        for u in block_sphere(d) {
            let mut p = Point::zeros(total);
            for (j, v) in u.iter().enumerate() {
                p[off + j] = r[i] * v;
            }
            out.push(p);
        }
        off += d;
    }
    out
}

fn small_model() -> impl Strategy<Value = (Vec<usize>, Vec<f64>)> {
    prop::sample::select(vec![vec![1, 1], vec![1, 1, 1], vec![1, 2], vec![2, 1], vec![2]]).prop_flat_map(|dims| {
        let n = dims.len();
        (Just(dims), prop::collection::vec(0.2f64..0.9, n))
    })
    .prop_map(|(dims, q)| {
        let mut r = Vec::new();
        let mut cur = 1.0;
        for f in q {
            r.push(cur);
            cur *= f;
        }
        (dims, r)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // {gauge <= 1} equals the convex hull of the scaled block spheres, in
    // dimensions up to three
    #[test]
    fn gauge_ball_is_the_hull((dims, r) in small_model(), seed in 0u64..10_000) {
        use rand::Rng;
        let k = euclidean(&dims, &r);
        let gens = generators(&dims, &r);
        let total: usize = dims.iter().sum();
        let mut rng = lipretract::rng::stream_rng(seed, 0);
        // hull points have gauge at most one
        for _ in 0..50 {
            let w: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum::<f64>() + rng.random::<f64>();
            let mut x = Point::zeros(total);
            for wi in &w {
                x += &gens[rng.random_range(0..gens.len())] * (wi / s);
            }
            prop_assert!(k.gauge(&x) <= 1.0 + 1e-12);
        }
        for _ in 0..50 {
            let x = Point::from_fn(total, |_, _| 2.4 * rng.random::<f64>() - 1.2);
            let g = k.gauge(&x);
            if g <= 1.0 {
                // explicit convex combination with weights |x_i| / r_i
                let mut y = Point::zeros(total);
                let mut off = 0;
                let mut mass = 0.0;
                for (i, &d) in dims.iter().enumerate() {
                    let xi = x.rows(off, d);
                    let n = xi.norm();
                    if n > 0.0 {
                        let w = n / r[i];
                        mass += w;
                        let mut v = Point::zeros(total);
                        v.rows_mut(off, d).copy_from(&(xi * (r[i] / n)));
                        y += v * w;
                    }
                    off += d;
                }
                prop_assert!(mass <= 1.0 + 1e-12);
                prop_assert!((&y - &x).amax() <= 1e-12);
            } else {
                // a functional separates x from every sampled generator
                let f = k.gauge_subgradient(&x);
                prop_assert!(f.dot(&x) > 1.0 - 1e-12);
                let sup = gens.iter().map(|v| f.dot(v)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(sup <= 1.0 + 1e-12, "sup {sup}");
            }
        }
    }
}
