//! Sampling-based metric estimators: empirical Lipschitz constants and moduli
//! of continuity.
//!
//! All estimates are lower bounds of the true quantities. Pairs are drawn in
//! [`CHUNK`](crate::rng::CHUNK)-sized chunks with one random stream each, so
//! reports do not depend on the number of worker threads.

use crate::error::{invalid, Error, Result};
use crate::norm::{euclidean_direction, Norm, Point};
use crate::rng::{chunked, SimRng};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Retries allowed when a sampler returns two identical points.
pub const MAX_RESAMPLES: usize = 100;

/// Something that produces pairs of points.
pub trait PairSource: Sync {
    fn dim(&self) -> usize;
    fn pair(&self, rng: &mut SimRng) -> (Point, Point);
}

type PointFn<'a> = Box<dyn Fn(&mut SimRng) -> Point + Send + Sync + 'a>;

/// Mixture of three pair regimes: independent pairs from a base
/// distribution, local pairs `(x, x + s v)` at log-uniform scales `s`, and
/// pairs near a shell (typically the boundary of a piecewise-defined map).
pub struct PairSampler<'a> {
    dim: usize,
    base: PointFn<'a>,
    shell: Option<PointFn<'a>>,
    local_scale: Point,
    scale_range: (f64, f64),
    weights: [f64; 3],
}

impl<'a> PairSampler<'a> {
    pub fn new(dim: usize, base: impl Fn(&mut SimRng) -> Point + Send + Sync + 'a) -> Self {
        Self {
            dim,
            base: Box::new(base),
            shell: None,
            local_scale: Point::from_element(dim, 1.0),
            scale_range: (1e-6, 1e-1),
            weights: [0.4, 0.6, 0.0],
        }
    }

    /// Uniform points of the cube `[-half_width, half_width]^dim`.
    pub fn in_box(dim: usize, half_width: f64) -> Self {
        Self::new(dim, move |rng| {
            Point::from_fn(dim, |_, _| rng.random_range(-half_width..=half_width))
        })
    }

    /// Points of the ball of radius `radius` of `norm`.
    pub fn in_ball(norm: &'a dyn Norm, radius: f64) -> Self {
        Self::new(norm.dim(), move |rng| norm.sample_unit_ball(rng) * radius)
    }

    /// Add a shell regime; weights become 0.3 / 0.4 / 0.3.
    pub fn with_shell(mut self, shell: impl Fn(&mut SimRng) -> Point + Send + Sync + 'a) -> Self {
        self.shell = Some(Box::new(shell));
        self.weights = [0.3, 0.4, 0.3];
        self
    }

    /// Per-coordinate scale of local perturbations.
    pub fn with_local_scale(mut self, scale: Point) -> Self {
        assert_eq!(scale.len(), self.dim);
        self.local_scale = scale;
        self
    }

    /// Range of local perturbation sizes, sampled log-uniformly.
    pub fn with_scale_range(mut self, lo: f64, hi: f64) -> Self {
        assert!(lo > 0.0 && hi >= lo);
        self.scale_range = (lo, hi);
        self
    }

    /// Relative weights of the uniform, local and shell regimes.
    pub fn with_weights(mut self, weights: [f64; 3]) -> Self {
        assert!(weights.iter().all(|w| *w >= 0.0) && weights.iter().sum::<f64>() > 0.0);
        self.weights = weights;
        self
    }

    fn perturb(&self, x: &Point, rng: &mut SimRng) -> Point {
        let (lo, hi) = self.scale_range;
        let s = if lo == hi { lo } else { (rng.random_range(lo.ln()..hi.ln())).exp() };
        let dir = euclidean_direction(self.dim, rng).component_mul(&self.local_scale);
        x + dir * s
    }
}

impl PairSource for PairSampler<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn pair(&self, rng: &mut SimRng) -> (Point, Point) {
        let w = match self.shell {
            Some(_) => self.weights,
            None => [self.weights[0], self.weights[1] + self.weights[2], 0.0],
        };
        let u = rng.random::<f64>() * (w[0] + w[1] + w[2]);
        if u < w[0] {
            ((self.base)(rng), (self.base)(rng))
        } else if u < w[0] + w[1] {
            let x = (self.base)(rng);
            let y = self.perturb(&x, rng);
            (x, y)
        } else {
            let shell = self.shell.as_ref().unwrap();
            let x = shell(rng);
            let y = if rng.random::<bool>() { shell(rng) } else { self.perturb(&x, rng) };
            (x, y)
        }
    }
}

/// Pairs from an arbitrary closure.
pub struct FnPairs<F>(pub usize, pub F);

impl<F> PairSource for FnPairs<F>
where
    F: Fn(&mut SimRng) -> (Point, Point) + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }
    fn pair(&self, rng: &mut SimRng) -> (Point, Point) {
        (self.1)(rng)
    }
}

fn draw_distinct(sampler: &dyn PairSource, norm: &dyn Norm, rng: &mut SimRng) -> Result<(Point, Point, f64)> {
    for _ in 0..MAX_RESAMPLES {
        let (x, y) = sampler.pair(rng);
        let d = norm.norm(&(&x - &y));
        if d > 0.0 && d.is_finite() {
            return Ok((x, y, d));
        }
    }
    Err(Error::CoincidentPairs(MAX_RESAMPLES))
}

/// The pair attaining an empirical maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgmaxPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub estimate: f64,
    pub pair_count: usize,
    pub seed: u64,
    pub argmax: Option<ArgmaxPair>,
    pub note: String,
}

/// Empirical Lipschitz constant of `map` with the same norm on both sides.
pub fn estimate_lipschitz<F>(
    map: F,
    norm: &dyn Norm,
    sampler: &dyn PairSource,
    pair_count: usize,
    seed: u64,
) -> Result<LipschitzReport>
where
    F: Fn(&Point) -> Point + Sync,
{
    estimate_lipschitz_between(map, norm, norm, sampler, pair_count, seed)
}

/// Empirical Lipschitz constant of `map` from `(X, in_norm)` to `(Y, out_norm)`:
/// the largest sampled quotient `|T x - T y| / |x - y|`.
pub fn estimate_lipschitz_between<F>(
    map: F,
    in_norm: &dyn Norm,
    out_norm: &dyn Norm,
    sampler: &dyn PairSource,
    pair_count: usize,
    seed: u64,
) -> Result<LipschitzReport>
where
    F: Fn(&Point) -> Point + Sync,
{
    if pair_count == 0 {
        return Err(invalid("pair_count must be at least 1"));
    }
    if sampler.dim() == 0 {
        return Err(Error::EmptyDomain);
    }
    let chunks = chunked(pair_count, seed, |rng, range| -> Result<Option<(f64, Point, Point)>> {
        let mut best: Option<(f64, Point, Point)> = None;
        for _ in range {
            let (x, y, d) = draw_distinct(sampler, in_norm, rng)?;
            let q = out_norm.norm(&(map(&x) - map(&y))) / d;
            if q.is_nan() {
                return Err(Error::Numerical("map returned NaN".into()));
            }
            if best.as_ref().is_none_or(|b| q > b.0) {
                best = Some((q, x, y));
            }
        }
        Ok(best)
    });
    let mut best: Option<(f64, Point, Point)> = None;
    for c in chunks {
        if let Some(b) = c? {
            if best.as_ref().is_none_or(|cur| b.0 > cur.0) {
                best = Some(b);
            }
        }
    }
    let (estimate, x, y) = best.ok_or(Error::EmptyDomain)?;
    Ok(LipschitzReport {
        estimate,
        pair_count,
        seed,
        argmax: Some(ArgmaxPair { x: x.as_slice().to_vec(), y: y.as_slice().to_vec() }),
        note: "one-sided: a lower estimate of the Lipschitz norm".into(),
    })
}

/// Sampled modulus of continuity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusTable {
    pub scales: Vec<f64>,
    pub omega: Vec<f64>,
    pub pair_count: usize,
    pub seed: u64,
}

impl ModulusTable {
    pub fn omega_at(&self, t: f64) -> Option<f64> {
        self.scales.iter().position(|&s| s == t).map(|i| self.omega[i])
    }

    pub fn is_monotone(&self) -> bool {
        self.omega.windows(2).all(|w| w[0] <= w[1])
    }
}

/// For each scale `t`, the largest sampled `|T x - T y|` over pairs with
/// `|x - y| <= t`. Use a [`PairSampler`] with a scale range reaching below
/// the smallest `t` so every bucket is populated.
pub fn estimate_modulus<F>(
    map: F,
    norm: &dyn Norm,
    sampler: &dyn PairSource,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ModulusTable>
where
    F: Fn(&Point) -> Point + Sync,
{
    if scales.is_empty() || scales.iter().any(|&t| !(t > 0.0)) || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("scales must be positive and strictly increasing"));
    }
    let k = scales.len();
    let chunks = chunked(samples, seed, |rng, range| -> Result<Vec<f64>> {
        let mut local = vec![0.0f64; k];
        for _ in range {
            let (x, y, d) = draw_distinct(sampler, norm, rng)?;
            let bucket = scales.partition_point(|&t| t < d);
            if bucket == k {
                continue;
            }
            let out = norm.norm(&(map(&x) - map(&y)));
            if out.is_nan() {
                return Err(Error::Numerical("map returned NaN".into()));
            }
            local[bucket] = local[bucket].max(out);
        }
        Ok(local)
    });
    let mut omega = vec![0.0f64; k];
    for c in chunks {
        for (o, v) in omega.iter_mut().zip(c?) {
            *o = o.max(v);
        }
    }
    for i in 1..k {
        omega[i] = omega[i].max(omega[i - 1]);
    }
    Ok(ModulusTable { scales: scales.to_vec(), omega, pair_count: samples, seed })
}

/// `x` if `|x| <= rho`, otherwise `rho x / |x|`.
pub fn radial_projection(norm: &dyn Norm, x: &Point, rho: f64) -> Point {
    assert!(rho > 0.0, "radius must be positive");
    let n = norm.norm(x);
    if n <= rho {
        x.clone()
    } else {
        x * (rho / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};

    #[test]
    fn identity_and_dilation_are_exact() {
        let n = PNorm::new(PExponent::Two, 3);
        let s = PairSampler::in_box(3, 1.0);
        let id = estimate_lipschitz(|x: &Point| x.clone(), &n, &s, 2000, 1).unwrap();
        assert_eq!(id.estimate, 1.0);
        let two = estimate_lipschitz(|x: &Point| x * 2.0, &n, &s, 2000, 1).unwrap();
        assert_eq!(two.estimate, 2.0);
    }

    #[test]
    fn estimate_is_reproducible() {
        let n = PNorm::new(PExponent::Inf, 2);
        let s = PairSampler::in_box(2, 2.0);
        let f = |x: &Point| radial_projection(&n, x, 1.0);
        let a = estimate_lipschitz(f, &n, &s, 5000, 9).unwrap();
        let b = estimate_lipschitz(f, &n, &s, 5000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.estimate >= 1.0 && a.estimate <= 2.0 + 1e-12);
    }

    #[test]
    fn coincident_sampler_is_an_error() {
        let n = PNorm::new(PExponent::Two, 1);
        let s = FnPairs(1, |_: &mut SimRng| (Point::zeros(1), Point::zeros(1)));
        let e = estimate_lipschitz(|x: &Point| x.clone(), &n, &s, 10, 0).unwrap_err();
        assert!(matches!(e, Error::CoincidentPairs(MAX_RESAMPLES)));
        assert!(estimate_lipschitz(|x: &Point| x.clone(), &n, &PairSampler::in_box(1, 1.0), 0, 0).is_err());
    }

    #[test]
    fn linear_map_estimate_below_operator_norm() {
        // [[2, 1], [0, 1]] has l2 operator norm sqrt(3 + sqrt(5))
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let true_norm = (3.0 + 5f64.sqrt()).sqrt();
        let n = PNorm::new(PExponent::Two, 2);
        let s = PairSampler::in_box(2, 1.0);
        let r = estimate_lipschitz(|x: &Point| &m * x, &n, &s, 20000, 4).unwrap();
        assert!(r.estimate <= true_norm + 1e-12);
        assert!(r.estimate > true_norm - 1e-3);
    }

    #[test]
    fn modulus_of_constant_and_contraction() {
        let n = PNorm::new(PExponent::Two, 2);
        let s = PairSampler::in_box(2, 1.0).with_scale_range(1e-4, 1.0).with_weights([0.2, 0.8, 0.0]);
        let scales = [1e-3, 1e-2, 1e-1, 1.0];
        let c = estimate_modulus(|_: &Point| Point::zeros(2), &n, &s, &scales, 4000, 2).unwrap();
        assert!(c.omega.iter().all(|&w| w == 0.0));
        let h = estimate_modulus(|x: &Point| x * 0.5, &n, &s, &scales, 4000, 2).unwrap();
        assert!(h.is_monotone());
        for (t, w) in h.scales.iter().zip(&h.omega) {
            assert!(*w <= *t);
        }
        assert!(estimate_modulus(|x: &Point| x.clone(), &n, &s, &[1.0, 0.5], 10, 0).is_err());
    }

    #[test]
    fn radial_projection_cases() {
        let n = PNorm::new(PExponent::Two, 2);
        let x = Point::from_vec(vec![2.0, 0.0]);
        assert_eq!(radial_projection(&n, &x, 1.0), Point::from_vec(vec![1.0, 0.0]));
        let y = Point::from_vec(vec![0.3, 0.4]);
        assert_eq!(radial_projection(&n, &y, 1.0), y);
    }
}
