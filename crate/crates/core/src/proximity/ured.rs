//! The renorming `|||x||| = sqrt(|x|² + Σ_n (f_n(x) / 2^n)²)`.
//!
//! The added term is the square of a Hilbert norm of `Tx = (f_n(x) / 2^n)`,
//! injective when the `f_n` separate points, which makes the new norm
//! rotund in every direction.

use crate::error::{invalid, Error, Result};
use crate::norm::{Norm, Point};
use crate::rng::{stream_rng, SimRng};

pub struct UREDNorm<N> {
    base: N,
    functionals: Vec<Point>,
    weights: Vec<f64>,
    constant: f64,
}

/// Renorm `base` with the first `depth` of `functionals`. Each functional
/// must have dual norm at most one and together they must separate points.
pub fn ured_renorm<N: Norm>(base: N, functionals: Vec<Point>, depth: usize) -> Result<UREDNorm<N>> {
    let d = base.dim();
    if depth == 0 || depth > functionals.len() {
        return Err(invalid("depth must lie between 1 and the number of functionals"));
    }
    let functionals: Vec<Point> = functionals.into_iter().take(depth).collect();
    if functionals.iter().any(|f| f.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: functionals[0].len() });
    }
    for (i, f) in functionals.iter().enumerate() {
        let n = functional_norm(&base, f);
        if n > 1.0 + 1e-9 {
            return Err(invalid(&format!("functional {} has norm {n} > 1", i + 1)));
        }
    }
    let m = nalgebra::DMatrix::from_fn(depth, d, |i, j| functionals[i][j]);
    if m.rank(1e-10) < d {
        return Err(invalid("functionals do not separate points"));
    }
    let weights: Vec<f64> = (1..=depth).map(|n| 0.5f64.powi(n as i32)).collect();
    let constant = (1.0 + weights.iter().map(|w| w * w).sum::<f64>()).sqrt();
    let norm = UREDNorm { base, functionals, weights, constant };
    let mut rng = stream_rng(0x0e0d, 0);
    for _ in 0..2000 {
        let x = crate::norm::gaussian(d, &mut rng);
        let (b, v) = (norm.base.norm(&x), norm.norm(&x));
        if v < b || v > norm.constant * b * (1.0 + 1e-12) {
            return Err(Error::Witness { what: format!("sandwich violated: {b} vs {v}"), witness: x.as_slice().to_vec() });
        }
    }
    Ok(norm)
}

fn functional_norm(base: &dyn Norm, f: &Point) -> f64 {
    if let Some(n) = base.dual_norm(f) {
        return n;
    }
    if let Some(vs) = base.unit_ball_vertices() {
        return vs.iter().map(|v| f.dot(v).abs()).fold(0.0, f64::max);
    }
    let mut rng = stream_rng(0x0f, 0);
    (0..20_000)
        .map(|_| {
            let x = base.sample_unit_ball(&mut rng);
            f.dot(&x).abs() / base.norm(&x).max(1e-300)
        })
        .fold(0.0, f64::max)
}

impl<N: Norm> UREDNorm<N> {
    /// `sqrt(1 + Σ 4^{-n})`, the upper equivalence constant.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn base(&self) -> &N {
        &self.base
    }

    fn t_terms(&self, x: &Point) -> impl Iterator<Item = f64> + '_ {
        let x = x.clone();
        self.functionals.iter().zip(&self.weights).map(move |(f, w)| f.dot(&x) * w)
    }
}

impl<N: Norm> Norm for UREDNorm<N> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn norm(&self, x: &Point) -> f64 {
        let b = self.base.norm(x);
        (b * b + self.t_terms(x).map(|t| t * t).sum::<f64>()).sqrt()
    }

    fn subgradient(&self, x: &Point) -> Point {
        let v = self.norm(x);
        if v == 0.0 {
            return Point::zeros(self.dim());
        }
        let mut g = self.base.subgradient(x) * self.base.norm(x);
        for ((f, w), t) in self.functionals.iter().zip(&self.weights).zip(self.t_terms(x).collect::<Vec<_>>()) {
            g += f * (t * w);
        }
        g / v
    }

    fn sample_unit_ball(&self, rng: &mut SimRng) -> Point {
        let d = self.dim();
        let u = crate::norm::gaussian(d, rng);
        let radius: f64 = rand::Rng::random::<f64>(rng).powf(1.0 / d as f64);
        &u * (radius / self.norm(&u).max(1e-300))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};
    use proptest::prelude::*;

    fn coords(d: usize) -> Vec<Point> {
        (0..d).map(|i| Point::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })).collect()
    }

    #[test]
    fn one_dimensional_value() {
        let n = ured_renorm(PNorm::new(PExponent::Inf, 1), coords(1), 1).unwrap();
        assert!((n.norm(&Point::from_vec(vec![1.0])) - 5f64.sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(n.norm(&Point::zeros(1)), 0.0);
    }

    #[test]
    fn bad_tables_are_rejected() {
        let base = PNorm::new(PExponent::Inf, 2);
        assert!(ured_renorm(base, vec![Point::from_vec(vec![1.0, 0.0])], 1).is_err());
        let big = vec![Point::from_vec(vec![1.0, 1.0]), Point::from_vec(vec![0.0, 1.0])];
        assert!(ured_renorm(PNorm::new(PExponent::Inf, 2), big, 2).is_err());
    }

    proptest! {
        #[test]
        fn sandwich(x in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let n = ured_renorm(PNorm::new(PExponent::Inf, 3), coords(3), 3).unwrap();
            let x = Point::from_vec(x);
            let b = n.base().norm(&x);
            prop_assert!(n.norm(&x) >= b);
            prop_assert!(n.norm(&x) <= n.constant() * b * (1.0 + 1e-12));
            prop_assert!(n.constant() <= (4.0f64 / 3.0).sqrt());
        }
    }
}
