//! Tubes `B_n^δ = {x : d(x, B_{Y_n}) <= δ}` and their assembled hull.

use super::block::{build_block, dist_to_euclidean_ball, ModelBlock};
use crate::convex::ConvexBody;
use crate::diamond::default_schedule;
use crate::error::{invalid, Result};
use crate::norm::{euclidean_direction, Norm, PExponent, Point};
use crate::optim::{ellipsoid_budget, ellipsoid_minimize};
use crate::rng::SimRng;
use crate::space::{Block, BlockNorm, BlockSpace};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Slack of tube membership.
pub const TUBE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeSet {
    pub block: ModelBlock,
    pub delta: f64,
}

impl TubeSet {
    pub fn new(block: ModelBlock, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(invalid("δ must be finite and non-negative"));
        }
        Ok(Self { block, delta })
    }

    pub fn dim(&self) -> usize {
        self.block.dim()
    }

    pub fn contains(&self, x: &Point) -> bool {
        dist_to_euclidean_ball(x, &self.block) <= self.delta + TUBE_TOL
    }

    /// `inf {t > 0 : x / t in B^δ}`, solved as one convex program in
    /// `(c, t)`: minimize `t` with `|x - Σ c_i a_i|_inf <= δ t` and `|c|_2 <= t`.
    /// For `δ = 0` the gauge is `|c|_2` on `Y_n` and infinite off it.
    pub fn gauge(&self, x: &Point) -> f64 {
        let scale = x.amax();
        if scale == 0.0 {
            return 0.0;
        }
        let b = &self.block;
        let c_ls = b.coefficients(x);
        let resid = (x - b.embed(&c_ls)).amax();
        if self.delta == 0.0 {
            return if resid <= 1e-12 * scale { c_ls.norm() } else { f64::INFINITY };
        }
        let n = b.n;
        let t_ls = c_ls.norm().max(resid / self.delta);
        let t_zero = scale / self.delta;
        let t0 = t_ls.min(t_zero);
        let mut center = Point::zeros(n + 1);
        if t_ls <= t_zero {
            center.rows_mut(0, n).copy_from(&c_ls);
        }
        center[n] = t0;
        let delta = self.delta;
        let (found, _) = ellipsoid_minimize(
            |z| {
                let mut g = Point::zeros(n + 1);
                g[n] = 1.0;
                (z[n], g)
            },
            |z| {
                let c = z.rows(0, n).into_owned();
                let t = z[n];
                let r = x - b.embed(&c);
                let j = r.iamax();
                let tube = r[j].abs() - delta * t;
                let cn = c.norm();
                let ball = cn - t;
                if tube <= 0.0 && ball <= 0.0 {
                    return None;
                }
                let mut g = Point::zeros(n + 1);
                if tube >= ball {
                    let mut e = Point::zeros(r.len());
                    e[j] = r[j].signum();
                    g.rows_mut(0, n).copy_from(&-(b.frame.transpose() * e));
                    g[n] = -delta;
                } else {
                    if cn > 0.0 {
                        g.rows_mut(0, n).copy_from(&(&c / cn));
                    }
                    g[n] = -1.0;
                }
                Some(g)
            },
            &center,
            2.0 * t0 * (1.0 + c_ls.norm() / t0.max(1e-300)).max(1.0) + 1e-12,
            ellipsoid_budget(n + 1),
        );
        found.map_or(t0, |f| f.1.min(t0))
    }

    /// A point of the tube: a point of `B_{Y_n}` plus a sup-norm perturbation of size at most `δ`.
    pub fn sample(&self, rng: &mut SimRng) -> Point {
        let n = self.block.n;
        let radius: f64 = rng.random::<f64>().powf(1.0 / n as f64);
        let c = euclidean_direction(n, rng) * radius;
        let mut x = self.block.embed(&c);
        let s = self.delta * rng.random::<f64>();
        for v in x.iter_mut() {
            *v += s * (2.0 * rng.random::<f64>() - 1.0);
        }
        x
    }
}

/// `K = conv(∪ λ_n B_n^{δ_n})` inside the sup-norm sum of the blocks. The
/// blocks occupy disjoint coordinates, so the gauge of the hull is
/// `Σ_n gauge_n(x_n) / λ_n`.
#[derive(Debug, Clone)]
pub struct AssembledCompact {
    tubes: Vec<TubeSet>,
    lambda: Vec<f64>,
    epsilon: f64,
    space: BlockSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDescription {
    pub n: usize,
    pub dim: usize,
    pub eps_embed: f64,
    /// Rows of the frame matrix; column `i` is `a_i`.
    pub frame: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssembledDescription {
    pub epsilon: f64,
    pub delta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub blocks: Vec<BlockDescription>,
}

/// Default tube widths `δ_n = 2^{-n}`.
pub fn default_deltas(depth: usize) -> Vec<f64> {
    (1..=depth).map(|n| 0.5f64.powi(n as i32)).collect()
}

impl AssembledCompact {
    /// Blocks `1..=depth` at embedding accuracy `ε`, widths `delta`
    /// (default `2^{-n}`) and scales `lambda` (default: the radii of
    /// [`default_schedule`]).
    pub fn build(depth: usize, epsilon: f64, delta: Option<Vec<f64>>, lambda: Option<Vec<f64>>, seed: u64) -> Result<Self> {
        let delta = delta.unwrap_or_else(|| default_deltas(depth));
        let lambda = match lambda {
            Some(l) => l,
            None => default_schedule(depth)?.r,
        };
        if delta.len() != depth || lambda.len() != depth {
            return Err(invalid("δ and λ need one entry per block"));
        }
        if lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(invalid("λ must be positive"));
        }
        let tubes = (1..=depth)
            .map(|n| TubeSet::new(build_block(n, epsilon, crate::rng::subseed(seed, n as u64))?, delta[n - 1]))
            .collect::<Result<Vec<_>>>()?;
        let blocks = tubes
            .iter()
            .map(|t| Block { dim: t.dim(), norm: BlockNorm::P(PExponent::Inf) })
            .collect();
        let space = BlockSpace::new(blocks, PExponent::Inf)?;
        Ok(Self { tubes, lambda, epsilon, space })
    }

    pub fn depth(&self) -> usize {
        self.tubes.len()
    }

    pub fn space(&self) -> &BlockSpace {
        &self.space
    }

    pub fn tube(&self, n: usize) -> &TubeSet {
        &self.tubes[n - 1]
    }

    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda[n - 1]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Norm bound of the partial sum projections of the block decomposition.
    pub fn fdd_constant(&self) -> f64 {
        1.0
    }

    /// Distance of `E_n` to `l_inf^{dim E_n}`; the model uses sup-norm blocks.
    pub fn banach_mazur(&self) -> f64 {
        1.0
    }

    /// Component of `x` in block `n`.
    pub fn component(&self, x: &Point, n: usize) -> Point {
        Point::from_column_slice(self.space.block_slice(x, n))
    }

    /// A sup-norm nearest point of `K` to `x` and its distance.
    ///
    /// Points of `K` are `y_n = Σ c_{n,i} a_i + e_n` with `|e_n|_inf <= δ_n t_n`,
    /// `|c_n|_2 <= t_n` and `Σ t_n / λ_n <= 1`. For fixed `(c, t)` the best
    /// `e_n` clips the residual, leaving `max_n max_j (|r_{n,j}| - δ_n t_n)_+`,
    /// which is minimized over `(c, t)` by the ellipsoid method. Ties in the
    /// sup norm are broken by that clipping.
    pub fn nearest_point(&self, x: &Point) -> (Point, f64) {
        if self.gauge(x) <= 1.0 {
            return (x.clone(), 0.0);
        }
        let offs: Vec<usize> = self
            .tubes
            .iter()
            .scan(0, |acc, t| {
                let o = *acc;
                *acc += t.block.n + 1;
                Some(o)
            })
            .collect();
        let nv: usize = self.tubes.iter().map(|t| t.block.n + 1).sum();
        let parts: Vec<Point> = (1..=self.depth()).map(|n| self.component(x, n)).collect();
        let residual = |z: &Point, n: usize| -> (Point, f64) {
            let t = &self.tubes[n];
            let c = z.rows(offs[n], t.block.n).into_owned();
            (&parts[n] - t.block.embed(&c), t.delta * z[offs[n] + t.block.n])
        };
        let objective = |z: &Point| {
            let mut best = (f64::NEG_INFINITY, 0, 0, 0.0);
            for n in 0..self.depth() {
                let (r, slack) = residual(z, n);
                let j = r.iamax();
                let v = r[j].abs() - slack;
                if v > best.0 {
                    best = (v, n, j, r[j].signum());
                }
            }
            let mut g = Point::zeros(nv);
            let (v, n, j, s) = best;
            if v <= 0.0 {
                return (0.0, g);
            }
            let t = &self.tubes[n];
            for i in 0..t.block.n {
                g[offs[n] + i] = -s * t.block.frame[(j, i)];
            }
            g[offs[n] + t.block.n] = -t.delta;
            (v, g)
        };
        let constraint = |z: &Point| {
            let mut worst = (0.0, usize::MAX);
            for (n, t) in self.tubes.iter().enumerate() {
                let c = z.rows(offs[n], t.block.n);
                let v = c.norm() - z[offs[n] + t.block.n];
                if v > worst.0 {
                    worst = (v, n);
                }
            }
            let budget: f64 = (0..self.depth()).map(|n| z[offs[n] + self.tubes[n].block.n] / self.lambda[n]).sum::<f64>() - 1.0;
            let mut g = Point::zeros(nv);
            if budget > worst.0 {
                for n in 0..self.depth() {
                    g[offs[n] + self.tubes[n].block.n] = 1.0 / self.lambda[n];
                }
                return Some(g);
            }
            let n = worst.1;
            if n == usize::MAX {
                return None;
            }
            let t = &self.tubes[n];
            let c = z.rows(offs[n], t.block.n).into_owned();
            let cn = c.norm();
            if cn > 0.0 {
                g.rows_mut(offs[n], t.block.n).copy_from(&(&c / cn));
            }
            g[offs[n] + t.block.n] = -1.0;
            Some(g)
        };
        let radius = 2.0 * self.lambda.iter().map(|l| l * l).sum::<f64>().sqrt() + 1e-12;
        let (found, _) = ellipsoid_minimize(objective, constraint, &Point::zeros(nv), radius, ellipsoid_budget(nv));
        let z = found.map_or_else(|| Point::zeros(nv), |f| f.0);
        let mut y = Point::zeros(self.dim());
        for n in 0..self.depth() {
            let t = &self.tubes[n];
            let c = z.rows(offs[n], t.block.n).into_owned();
            let slack = t.delta * z[offs[n] + t.block.n];
            let (r, _) = residual(&z, n);
            let yn = t.block.embed(&c) + r.map(|v| v.clamp(-slack, slack));
            for (k, v) in self.space.block_range(n + 1).zip(yn.iter()) {
                y[k] = *v;
            }
        }
        let dist = (x - &y).amax();
        (y, dist)
    }

    pub fn describe(&self) -> AssembledDescription {
        AssembledDescription {
            epsilon: self.epsilon,
            delta: self.tubes.iter().map(|t| t.delta).collect(),
            lambda: self.lambda.clone(),
            blocks: self
                .tubes
                .iter()
                .map(|t| BlockDescription {
                    n: t.block.n,
                    dim: t.dim(),
                    eps_embed: t.block.eps_embed,
                    frame: (0..t.dim()).map(|j| t.block.frame.row(j).iter().cloned().collect()).collect(),
                })
                .collect(),
        }
    }
}

impl ConvexBody for AssembledCompact {
    fn dim(&self) -> usize {
        self.space.total_dim()
    }

    fn ambient(&self) -> &dyn Norm {
        &self.space
    }

    fn gauge(&self, x: &Point) -> f64 {
        (1..=self.depth()).map(|n| self.tube(n).gauge(&self.component(x, n)) / self.lambda(n)).sum()
    }

    fn sample(&self, rng: &mut SimRng) -> Point {
        let k = self.depth();
        let e: Vec<f64> = (0..=k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        let mut x = Point::zeros(self.dim());
        for n in 1..=k {
            let y = self.tube(n).sample(rng) * (self.lambda(n) * e[n - 1] / total);
            for (c, v) in self.space.block_range(n).zip(y.iter()) {
                x[c] = *v;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn tube(n: usize, delta: f64) -> TubeSet {
        TubeSet::new(build_block(n, 0.5, 0).unwrap(), delta).unwrap()
    }

    #[test]
    fn zero_width_tube_is_the_euclidean_ball() {
        let t = tube(2, 0.0);
        let c = Point::from_vec(vec![0.6, 0.8]);
        assert!((t.gauge(&t.block.embed(&c)) - 1.0).abs() < 1e-12);
        let mut off = t.block.embed(&c);
        off[0] += 0.1;
        assert_eq!(t.gauge(&off), f64::INFINITY);
        assert_eq!(t.gauge(&Point::zeros(t.dim())), 0.0);
    }

    #[test]
    fn gauge_is_homogeneous_and_matches_membership() {
        let t = tube(2, 0.2);
        let mut rng = stream_rng(1, 0);
        for _ in 0..50 {
            let x = crate::norm::gaussian(t.dim(), &mut rng);
            let g = t.gauge(&x);
            assert!((t.gauge(&(&x * 2.0)) - 2.0 * g).abs() <= 1e-9 * g);
            assert!(t.contains(&(&x / (g * (1.0 + 1e-6)))));
            assert!(!t.contains(&(&x / (g * (1.0 - 1e-6)))));
        }
    }

    #[test]
    fn sandwich_and_convexity() {
        let t = tube(2, 0.25);
        let mut rng = stream_rng(2, 0);
        for _ in 0..300 {
            let u = t.sample(&mut rng);
            let v = t.sample(&mut rng);
            assert!(t.contains(&u) && u.amax() <= 1.25 + 1e-12);
            let s: f64 = rng.random();
            assert!(t.contains(&(&u * s + &v * (1.0 - s))));
            let c = euclidean_direction(2, &mut rng) * rng.random::<f64>();
            assert!(t.contains(&t.block.embed(&c)));
        }
    }

    #[test]
    fn one_dimensional_tube_is_an_interval() {
        let t = tube(1, 0.5);
        let x = Point::from_vec(vec![3.0]);
        assert!((t.gauge(&x) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn assembled_gauge_adds_block_gauges() {
        let k = AssembledCompact::build(2, 0.5, None, None, 0).unwrap();
        assert_eq!(k.lambda(1), 1.0);
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let x = k.sample(&mut rng);
            assert!(k.gauge(&x) <= 1.0 + 1e-9);
        }
        let d = k.describe();
        assert_eq!(d.blocks.len(), 2);
        assert_eq!(d.delta, vec![0.5, 0.25]);
    }

    #[test]
    fn nearest_point_beats_sampled_points_of_k() {
        let k = AssembledCompact::build(2, 0.5, None, None, 0).unwrap();
        let mut rng = stream_rng(4, 0);
        let pts: Vec<Point> = (0..4000).map(|_| k.sample(&mut rng)).collect();
        for _ in 0..20 {
            let x = crate::norm::sample_p_ball(PExponent::Inf, k.dim(), &mut rng) * 2.0;
            let (y, dist) = k.nearest_point(&x);
            assert!(k.gauge(&y) <= 1.0 + 1e-9);
            assert!(((&x - &y).amax() - dist).abs() < 1e-15);
            let sampled = pts.iter().map(|p| (&x - p).amax()).fold(f64::INFINITY, f64::min);
            assert!(dist <= sampled + 1e-9, "{dist} {sampled}");
        }
        let inside = k.sample(&mut rng);
        assert_eq!(k.nearest_point(&inside).0, inside);
    }

    #[test]
    fn nearest_point_agrees_with_the_general_solver() {
        use crate::proximity::{nearest_point_general, GeneralConfig};
        let k = AssembledCompact::build(1, 0.5, None, None, 0).unwrap();
        let x = Point::from_vec(vec![2.5]);
        let (_, d) = k.nearest_point(&x);
        let g = nearest_point_general(&x, &k, k.space(), GeneralConfig::default()).unwrap();
        assert!((d - 1.0).abs() < 1e-9 && (g.distance - d).abs() < 1e-6);
    }
}
