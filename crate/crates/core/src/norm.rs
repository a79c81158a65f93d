//! Norms on coordinate spaces.
//!
//! Everything downstream talks to a norm through the [`Norm`] trait: block
//! spaces, sup-norm model blocks, polyhedral table norms and the rotund
//! renormings of the proximity module all implement it.

use crate::error::{invalid, Result};
use crate::rng::SimRng;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// A point of a finite-dimensional model space.
pub type Point = DVector<f64>;

/// A norm on `R^dim`.
pub trait Norm: Send + Sync {
    fn dim(&self) -> usize;

    fn norm(&self, x: &Point) -> f64;

    /// `sup { g(x) : norm(x) <= 1 }`, when the crate knows how to evaluate it.
    fn dual_norm(&self, _g: &Point) -> Option<f64> {
        None
    }

    /// A subgradient of the norm at `x`. The default is a central difference.
    fn subgradient(&self, x: &Point) -> Point {
        let h = 1e-7 * (1.0 + x.amax());
        let mut g = Point::zeros(x.len());
        let mut y = x.clone();
        for i in 0..x.len() {
            let xi = y[i];
            y[i] = xi + h;
            let up = self.norm(&y);
            y[i] = xi - h;
            let down = self.norm(&y);
            y[i] = xi;
            g[i] = (up - down) / (2.0 * h);
        }
        g
    }

    /// Vertices of the unit ball, for polyhedral norms of small dimension.
    fn unit_ball_vertices(&self) -> Option<Vec<Point>> {
        None
    }

    /// A random point of the unit ball. The default draws a Gaussian
    /// direction, normalizes it in this norm and applies a `U^(1/d)` radius;
    /// it covers the ball but is only volume-uniform for the Euclidean norm.
    fn sample_unit_ball(&self, rng: &mut SimRng) -> Point {
        let d = self.dim();
        loop {
            let g = gaussian(d, rng);
            let n = self.norm(&g);
            if n > 0.0 {
                let radius: f64 = rng.random::<f64>().powf(1.0 / d as f64);
                return g * (radius / n);
            }
        }
    }

    fn is_euclidean(&self) -> bool {
        false
    }
}

impl<N: Norm + ?Sized> Norm for &N {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn norm(&self, x: &Point) -> f64 {
        (**self).norm(x)
    }
    fn dual_norm(&self, g: &Point) -> Option<f64> {
        (**self).dual_norm(g)
    }
    fn subgradient(&self, x: &Point) -> Point {
        (**self).subgradient(x)
    }
    fn unit_ball_vertices(&self) -> Option<Vec<Point>> {
        (**self).unit_ball_vertices()
    }
    fn sample_unit_ball(&self, rng: &mut SimRng) -> Point {
        (**self).sample_unit_ball(rng)
    }
    fn is_euclidean(&self) -> bool {
        (**self).is_euclidean()
    }
}

/// The exponents supported for block norms and ambient rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PExponent {
    #[serde(rename = "l1")]
    One,
    #[serde(rename = "l2")]
    Two,
    #[serde(rename = "linf")]
    Inf,
}

impl PExponent {
    pub fn dual(self) -> Self {
        match self {
            PExponent::One => PExponent::Inf,
            PExponent::Two => PExponent::Two,
            PExponent::Inf => PExponent::One,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            PExponent::One => 1.0,
            PExponent::Two => 2.0,
            PExponent::Inf => f64::INFINITY,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" | "1" => Ok(PExponent::One),
            "l2" | "2" => Ok(PExponent::Two),
            "linf" | "inf" => Ok(PExponent::Inf),
            other => Err(invalid(format!("unknown p-norm tag `{other}`"))),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            PExponent::One => "l1",
            PExponent::Two => "l2",
            PExponent::Inf => "linf",
        }
    }

    /// p-norm of a slice of reals.
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            PExponent::One => v.iter().map(|a| a.abs()).sum(),
            PExponent::Two => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
            PExponent::Inf => v.iter().fold(0.0, |m, a| m.max(a.abs())),
        }
    }

    /// A subgradient of the p-norm at `v`, written into `out`.
    pub fn subgradient_into(self, v: &[f64], out: &mut [f64]) {
        match self {
            PExponent::One => {
                for (o, a) in out.iter_mut().zip(v) {
                    *o = sign(*a);
                }
            }
            PExponent::Two => {
                let n = self.eval(v);
                for (o, a) in out.iter_mut().zip(v) {
                    *o = if n > 0.0 { a / n } else { 0.0 };
                }
            }
            PExponent::Inf => {
                out.iter_mut().for_each(|o| *o = 0.0);
                if let Some(j) = argmax_abs(v) {
                    if v[j] != 0.0 {
                        out[j] = sign(v[j]);
                    }
                }
            }
        }
    }

    /// A unit vector `u` (in this norm) with `<g, u>` equal to the dual norm of `g`.
    pub fn norming_point(self, g: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; g.len()];
        match self {
            // dual is l_inf: put all mass on the largest coordinate
            PExponent::One => {
                if let Some(j) = argmax_abs(g) {
                    u[j] = if g[j] < 0.0 { -1.0 } else { 1.0 };
                }
            }
            PExponent::Two => {
                let n = self.eval(g);
                if n > 0.0 {
                    u.iter_mut().zip(g).for_each(|(o, a)| *o = a / n);
                } else if !u.is_empty() {
                    u[0] = 1.0;
                }
            }
            PExponent::Inf => {
                u.iter_mut()
                    .zip(g)
                    .for_each(|(o, a)| *o = if *a < 0.0 { -1.0 } else { 1.0 });
            }
        }
        u
    }
}

/// Polyhedral norm `|x| = max_j |f_j(x)|` given by a table of functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableNorm {
    functionals: Vec<Vec<f64>>,
    dim: usize,
}

impl TableNorm {
    pub fn new(functionals: Vec<Vec<f64>>) -> Result<Self> {
        let dim = functionals
            .first()
            .map(|f| f.len())
            .ok_or_else(|| invalid("functional table is empty"))?;
        if dim == 0 || functionals.iter().any(|f| f.len() != dim) {
            return Err(invalid("functional table rows must share a positive length"));
        }
        let m = nalgebra::DMatrix::from_fn(functionals.len(), dim, |i, j| functionals[i][j]);
        if m.rank(1e-10) < dim {
            return Err(invalid("functional table does not separate points"));
        }
        Ok(Self { functionals, dim })
    }

    pub fn functionals(&self) -> &[Vec<f64>] {
        &self.functionals
    }

    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn eval_slice(&self, x: &[f64]) -> f64 {
        self.functionals
            .iter()
            .map(|f| dot(f, x).abs())
            .fold(0.0, f64::max)
    }

    pub fn subgradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut best = (0.0, None);
        for (j, f) in self.functionals.iter().enumerate() {
            let v = dot(f, x);
            if v.abs() > best.0 {
                best = (v.abs(), Some((j, sign(v))));
            }
        }
        if let Some((j, s)) = best.1 {
            out.iter_mut()
                .zip(&self.functionals[j])
                .for_each(|(o, f)| *o = s * f);
        }
    }
}

impl Norm for TableNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn norm(&self, x: &Point) -> f64 {
        self.eval_slice(x.as_slice())
    }
    fn subgradient(&self, x: &Point) -> Point {
        let mut g = Point::zeros(self.dim);
        self.subgradient_into(x.as_slice(), g.as_mut_slice());
        g
    }
}

/// The plain coordinate p-norm on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PNorm {
    pub p: PExponent,
    pub dim: usize,
}

impl PNorm {
    pub fn new(p: PExponent, dim: usize) -> Self {
        Self { p, dim }
    }
}

impl Norm for PNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn norm(&self, x: &Point) -> f64 {
        self.p.eval(x.as_slice())
    }
    fn dual_norm(&self, g: &Point) -> Option<f64> {
        Some(self.p.dual().eval(g.as_slice()))
    }
    fn subgradient(&self, x: &Point) -> Point {
        let mut g = Point::zeros(x.len());
        self.p.subgradient_into(x.as_slice(), g.as_mut_slice());
        g
    }
    fn unit_ball_vertices(&self) -> Option<Vec<Point>> {
        coordinate_ball_vertices(self.p, self.dim)
    }
    fn sample_unit_ball(&self, rng: &mut SimRng) -> Point {
        sample_p_ball(self.p, self.dim, rng)
    }
    fn is_euclidean(&self) -> bool {
        self.p == PExponent::Two || self.dim == 1
    }
}

/// Vertices of the unit ball of a coordinate l1 or l_inf norm (the latter only
/// up to dimension 16).
pub fn coordinate_ball_vertices(p: PExponent, dim: usize) -> Option<Vec<Point>> {
    match p {
        PExponent::One => Some(
            (0..dim)
                .flat_map(|i| {
                    [1.0, -1.0].into_iter().map(move |s| {
                        let mut v = Point::zeros(dim);
                        v[i] = s;
                        v
                    })
                })
                .collect(),
        ),
        PExponent::Inf if dim <= 16 => Some(
            (0..1usize << dim)
                .map(|mask| {
                    Point::from_fn(dim, |i, _| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                })
                .collect(),
        ),
        PExponent::Two if dim == 1 => Some(vec![Point::from_element(1, 1.0), Point::from_element(1, -1.0)]),
        _ => None,
    }
}

/// Volume-uniform sample of the unit ball of a coordinate p-norm.
pub fn sample_p_ball(p: PExponent, dim: usize, rng: &mut SimRng) -> Point {
    match p {
        PExponent::One => {
            // exponential spacings: (E_1..E_d)/(E_1+..+E_{d+1}) is uniform on
            // the corner simplex; random signs fill the cross-polytope
            let e: Vec<f64> = (0..=dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = e.iter().sum();
            Point::from_fn(dim, |i, _| {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                s * e[i] / total
            })
        }
        PExponent::Two => {
            let g = gaussian(dim, rng);
            let n = g.norm();
            let radius: f64 = rng.random::<f64>().powf(1.0 / dim as f64);
            if n > 0.0 {
                g * (radius / n)
            } else {
                g
            }
        }
        PExponent::Inf => Point::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0)),
    }
}

/// Uniform direction on the Euclidean sphere.
pub fn euclidean_direction(dim: usize, rng: &mut SimRng) -> Point {
    loop {
        let g = gaussian(dim, rng);
        let n = g.norm();
        if n > 1e-300 {
            return g / n;
        }
    }
}

pub fn gaussian(dim: usize, rng: &mut SimRng) -> Point {
    Point::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sign(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn argmax_abs(v: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, a) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| a.abs() > b) {
            best = Some((i, a.abs()));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn p_norms_on_small_vectors() {
        assert_eq!(PExponent::One.eval(&[3.0, -2.0]), 5.0);
        assert_eq!(PExponent::Two.eval(&[3.0, 4.0]), 5.0);
        assert_eq!(PExponent::Inf.eval(&[3.0, -7.0]), 7.0);
        assert_eq!(PExponent::Two.eval(&[]), 0.0);
    }

    #[test]
    fn norming_points_attain_dual_norm() {
        let g = [1.0, -3.0, 0.5];
        for p in [PExponent::One, PExponent::Two, PExponent::Inf] {
            let u = p.norming_point(&g);
            assert!((p.eval(&u) - 1.0).abs() < 1e-15);
            assert!((dot(&g, &u) - p.dual().eval(&g)).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_samplers_stay_inside() {
        let mut rng = stream_rng(1, 0);
        for p in [PExponent::One, PExponent::Two, PExponent::Inf] {
            for _ in 0..500 {
                let x = sample_p_ball(p, 5, &mut rng);
                assert!(p.eval(x.as_slice()) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn l_inf_table_with_coordinate_functionals_is_exact() {
        let t = TableNorm::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let x = Point::from_vec(vec![0.3, -0.9]);
        assert_eq!(t.norm(&x), 0.9);
    }

    #[test]
    fn table_must_separate() {
        assert!(TableNorm::new(vec![vec![1.0, 0.0], vec![2.0, 0.0]]).is_err());
        assert!(TableNorm::new(vec![]).is_err());
    }

    #[test]
    fn vertex_counts() {
        assert_eq!(coordinate_ball_vertices(PExponent::One, 3).unwrap().len(), 6);
        assert_eq!(coordinate_ball_vertices(PExponent::Inf, 3).unwrap().len(), 8);
        assert!(coordinate_ball_vertices(PExponent::Two, 3).is_none());
    }
}
