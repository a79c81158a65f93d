//! Inner radii, heights and the smallness certificate.
//!
//! For a fundamental sequence `β = (e_n)` with `E_n = span{e_1..e_n}`:
//!
//! * the inner radius `r_n` is the largest `r` such that a ball of radius `r`
//!   of `E_n` fits in `K ∩ E_n`;
//! * the height `h_n` is `sup_{x in K} d(x, E_n)`.
//!
//! `K` is small when `0 < h_{σ(n)} / r_{σ(n)} <= 1 / (2 σ(n)^2 ((1 + 2/ε)^σ(n) + 2))`
//! for every `n`.
//!
//! Ball centers are searched in `E_n` only. Diamonds with the coordinate
//! sequence use closed forms; other sets go through a sampled search which
//! is repeated at four times the budget before a verdict is emitted.

use crate::convex::ConvexBody;
use crate::diamond::{default_schedule, RadiiSchedule};
use crate::error::{invalid, Error, Result};
use crate::norm::{euclidean_direction, Norm, Point};
use crate::optim::{bisect_ray, distance_to_span, pattern_search};
use crate::rng::{stream_rng, subseed, SimRng};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Largest `(1 + 2/ε)^σ` accepted by [`phi`].
pub const PHI_CAP: f64 = 1e9;

/// An ordered spanning sequence `e_1, ..., e_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSequence {
    vectors: DMatrix<f64>,
    coordinate: bool,
}

impl FundamentalSequence {
    pub fn new(vectors: Vec<Point>) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).ok_or_else(|| invalid("empty fundamental sequence"))?;
        if vectors.iter().any(|v| v.len() != n) {
            return Err(invalid("fundamental sequence vectors differ in length"));
        }
        let m = DMatrix::from_columns(&vectors);
        if m.rank(1e-12) < vectors.len() {
            return Err(invalid("fundamental sequence is linearly dependent"));
        }
        let coordinate = m.ncols() == n && m == DMatrix::identity(n, n);
        Ok(Self { vectors: m, coordinate })
    }

    /// The unit vector basis of `R^dim`.
    pub fn coordinate(dim: usize) -> Self {
        Self { vectors: DMatrix::identity(dim, dim), coordinate: true }
    }

    pub fn len(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_coordinate(&self) -> bool {
        self.coordinate
    }

    /// Columns `e_1..e_n`.
    pub fn basis(&self, n: usize) -> DMatrix<f64> {
        self.vectors.columns(0, n).into_owned()
    }
}

/// Budget of the sampled geometric searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub directions: usize,
    pub centers: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { directions: 400, centers: 16, seed: 0 }
    }
}

impl SearchConfig {
    fn scaled(self, k: usize) -> Self {
        Self { directions: self.directions * k, centers: self.centers * k, seed: subseed(self.seed, k as u64) }
    }
}

fn unit_in_span(norm: &dyn Norm, basis: &DMatrix<f64>, rng: &mut SimRng) -> Point {
    loop {
        let c = euclidean_direction(basis.ncols(), rng);
        let u = basis * c;
        let n = norm.norm(&u);
        if n > 1e-300 {
            return u / n;
        }
    }
}

/// Radius of the largest ball of `E_n` centered at `c` inside the set,
/// estimated over sampled directions refined by local search.
fn radius_at(set: &dyn ConvexBody, c: &Point, basis: &DMatrix<f64>, directions: usize, rng: &mut SimRng) -> f64 {
    let norm = set.ambient();
    if !set.contains(c) {
        return 0.0;
    }
    let centered = c.iter().all(|&v| v == 0.0);
    let ray = |u: &Point| {
        if centered {
            // the gauge gives the exit time of a ray from the origin directly
            1.0 / set.gauge(u)
        } else {
            bisect_ray(|t| set.contains(&(c + u * t)), 1e-3, 1e-12)
        }
    };
    let mut best = f64::INFINITY;
    let mut best_coef = None;
    for _ in 0..directions {
        let u = unit_in_span(norm, basis, rng);
        let t = ray(&u);
        if t < best {
            best = t;
            best_coef = Some(basis.clone().svd(true, true).solve(&u, 1e-12).unwrap());
        }
    }
    if let Some(c0) = best_coef {
        let f = |coef: &Point| {
            let u = basis * coef;
            let n = norm.norm(&u);
            if n < 1e-300 {
                return f64::INFINITY;
            }
            ray(&(u / n))
        };
        let (_, v) = pattern_search(f, &c0, 0.1, 1e-13, 20_000, rng);
        best = best.min(v);
    }
    best
}

fn retract_to_span(x: &Point, basis: &DMatrix<f64>) -> Point {
    let c = basis.clone().svd(true, true).solve(x, 1e-12).unwrap();
    basis * c
}

/// Search estimate of `r_n^β`. Closed form for diamonds with the coordinate
/// sequence; otherwise the center `0` for symmetric sets and sampled centers
/// of `K ∩ E_n` in general.
pub fn inner_radius(set: &dyn ConvexBody, beta: &FundamentalSequence, n: usize, cfg: SearchConfig) -> Result<f64> {
    if n == 0 || n > beta.len() {
        return Err(Error::IndexOutOfRange { index: n, lo: 1, hi: beta.len() });
    }
    if beta.is_coordinate() {
        if let Some(r) = set.analytic_inner_radius(n) {
            return Ok(r);
        }
    }
    Ok(search_inner_radius(set, beta, n, cfg))
}

fn search_inner_radius(set: &dyn ConvexBody, beta: &FundamentalSequence, n: usize, cfg: SearchConfig) -> f64 {
    let basis = beta.basis(n);
    let mut rng = stream_rng(cfg.seed, n as u64);
    let zero = Point::zeros(set.dim());
    if set.is_symmetric() {
        return radius_at(set, &zero, &basis, cfg.directions, &mut rng);
    }
    let mut centers = vec![zero];
    for _ in 0..cfg.centers * 8 {
        let c = retract_to_span(&set.sample(&mut rng), &basis);
        if set.contains(&c) {
            centers.push(c);
        }
        if centers.len() > cfg.centers {
            break;
        }
    }
    let mean = centers.iter().fold(Point::zeros(set.dim()), |a, b| a + b) / centers.len() as f64;
    centers.push(mean);
    centers
        .iter()
        .map(|c| radius_at(set, c, &basis, cfg.directions, &mut rng))
        .fold(0.0, f64::max)
}

/// Search estimate of `h_n^β`; `n = 0` measures `sup |x|`.
pub fn height(set: &dyn ConvexBody, beta: &FundamentalSequence, n: usize, cfg: SearchConfig) -> Result<f64> {
    if n > beta.len() {
        return Err(Error::IndexOutOfRange { index: n, lo: 0, hi: beta.len() });
    }
    if beta.is_coordinate() {
        if let Some(h) = set.analytic_height(n) {
            return Ok(h);
        }
    }
    Ok(search_height(set, beta, n, cfg))
}

fn search_height(set: &dyn ConvexBody, beta: &FundamentalSequence, n: usize, cfg: SearchConfig) -> f64 {
    let basis = beta.basis(n);
    let mut rng = stream_rng(cfg.seed, 1_000_000 + n as u64);
    let norm = set.ambient();
    let d = set.dim();
    let mut best = 0.0f64;
    let mut best_x: Option<Point> = None;
    let boundary = |x: &Point| {
        let g = set.gauge(x);
        if g > 0.0 && g.is_finite() {
            Some(x / g)
        } else {
            None
        }
    };
    let mut candidates: Vec<Point> = (0..d)
        .flat_map(|i| {
            let mut e = Point::zeros(d);
            e[i] = 1.0;
            [e.clone(), -e]
        })
        .collect();
    for _ in 0..cfg.directions {
        let raw = if rand::Rng::random::<bool>(&mut rng) { set.sample(&mut rng) } else { euclidean_direction(d, &mut rng) };
        candidates.push(raw);
    }
    for raw in &candidates {
        if let Some(x) = boundary(raw) {
            let h = distance_to_span(norm, &x, &basis, &mut rng);
            if h > best {
                best = h;
                best_x = Some(x);
            }
        }
    }
    if let Some(x0) = best_x {
        let mut inner = stream_rng(cfg.seed, 2_000_000 + n as u64);
        let f = |y: &Point| match boundary(y) {
            Some(b) => -distance_to_span(norm, &b, &basis, &mut stream_rng(cfg.seed, 7)),
            None => 0.0,
        };
        let scale = x0.amax().max(1e-300);
        let (_, v) = pattern_search(f, &x0, 0.1 * scale, 1e-12 * scale, 4_000, &mut inner);
        best = best.max(-v);
    }
    best
}

/// `1 / (2 σ^2 ((1 + 2/ε)^σ + 2))`.
pub fn smallness_bound(sigma_n: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if sigma_n == 0 {
        return Err(invalid("σ(n) must be at least 1"));
    }
    let s = sigma_n as f64;
    Ok(1.0 / (2.0 * s * s * ((1.0 + 2.0 / epsilon).powi(sigma_n as i32) + 2.0)))
}

/// `floor((1 + 2/ε)^σ)`.
pub fn phi(sigma_n: usize, epsilon: f64) -> Result<u64> {
    check_epsilon(epsilon)?;
    let v = (1.0 + 2.0 / epsilon).powi(sigma_n as i32);
    if !(v <= PHI_CAP) {
        return Err(invalid(format!("(1 + 2/ε)^σ = {v:e} exceeds the cap {PHI_CAP:e}")));
    }
    // absorb rounding just below an integer
    let r = v.round();
    Ok(if (v - r).abs() <= 1e-9 * v { r as u64 } else { v.floor() as u64 })
}

/// `ε` must lie in `(0, 1]`; `ε = 1` is admitted so that the closed forms
/// can be evaluated at the endpoint.
pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("ε = {epsilon} is outside (0, 1]")))
    }
}

/// A strictly increasing index map `σ: {1..k} -> N`.
pub fn check_sigma(sigma: &[usize]) -> Result<()> {
    if sigma.first().is_some_and(|&s| s == 0) || sigma.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("σ must be strictly increasing with σ(1) >= 1"));
    }
    Ok(())
}

pub fn identity_sigma(k: usize) -> Vec<usize> {
    (1..=k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallRecord {
    pub n: usize,
    pub sigma_n: usize,
    pub r: f64,
    pub h: f64,
    pub ratio: f64,
    pub bound: f64,
    pub pass: bool,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessCertificate {
    pub epsilon: f64,
    pub sigma: Vec<usize>,
    pub records: Vec<SmallRecord>,
    pub verdict: bool,
}

impl SmallnessCertificate {
    pub fn record(&self, n: usize) -> Option<&SmallRecord> {
        self.records.iter().find(|r| r.n == n)
    }
}

/// Check `0 < h_{σ(n)} / r_{σ(n)} <= bound(σ(n), ε)` for `n = 1..=sigma.len()`.
/// Sampled estimates are taken in the conservative direction: the smaller
/// radius and the larger height of two runs, the second at four times the
/// budget. A zero radius is reported as a failing record.
pub fn check_small(
    set: &dyn ConvexBody,
    beta: &FundamentalSequence,
    epsilon: f64,
    sigma: &[usize],
    cfg: SearchConfig,
) -> Result<SmallnessCertificate> {
    check_epsilon(epsilon)?;
    check_sigma(sigma)?;
    let mut records = Vec::with_capacity(sigma.len());
    for (i, &s) in sigma.iter().enumerate() {
        if s > beta.len() {
            return Err(Error::IndexOutOfRange { index: s, lo: 1, hi: beta.len() });
        }
        let analytic = beta.is_coordinate() && set.analytic_inner_radius(s).is_some() && set.analytic_height(s).is_some();
        let (r, h) = if analytic {
            (set.analytic_inner_radius(s).unwrap(), set.analytic_height(s).unwrap())
        } else {
            let wide = cfg.scaled(4);
            let r = search_inner_radius(set, beta, s, cfg).min(search_inner_radius(set, beta, s, wide));
            let h = search_height(set, beta, s, cfg).max(search_height(set, beta, s, wide));
            (r, h)
        };
        let bound = smallness_bound(s, epsilon)?;
        let ratio = if r > 0.0 { h / r } else { f64::INFINITY };
        records.push(SmallRecord {
            n: i + 1,
            sigma_n: s,
            r,
            h,
            ratio,
            bound,
            pass: ratio > 0.0 && ratio <= bound,
            method: if analytic { "analytic" } else { "search" }.into(),
        });
    }
    let verdict = !records.is_empty() && records.iter().all(|r| r.pass);
    Ok(SmallnessCertificate { epsilon, sigma: sigma.to_vec(), records, verdict })
}

/// [`default_schedule`] with each ratio `q_{n+1}` additionally capped by
/// `bound(n, ε) / 4`. On a p-sum diamond with one-dimensional blocks this
/// keeps `h_n / r_n` below `bound(n, ε)` for `σ = id`, while the factor
/// budget of the default schedule is unchanged.
pub fn small_schedule(depth: usize, epsilon: f64) -> Result<RadiiSchedule> {
    let mut s = default_schedule(depth)?;
    for n in 1..depth {
        let cap = smallness_bound(n, epsilon)? / 4.0;
        s.q[n] = s.q[n].min(cap);
        s.r[n] = s.r[n - 1] * s.q[n];
    }
    Ok(s)
}
