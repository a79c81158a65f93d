//! Monte Carlo mollification over a small ball.
//!
//! `R_τ(x)` averages the base map over `x + τB` using one fixed set of
//! offsets drawn once at construction. Reusing the offsets makes `R_τ` a
//! deterministic average of translates of the base map, so it inherits the
//! Lipschitz constant of the base map exactly rather than up to noise. The
//! offsets come in antithetic pairs `±u`, so linear maps pass through
//! unchanged.

use crate::error::{invalid, Error, Result};
use crate::norm::{Norm, Point};
use crate::rng::stream_rng;
use serde::{Deserialize, Serialize};

/// Constants of the smoothing estimate for a map with
/// `|f(x) - f(y)| <= L |x - y| + 2h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingBudget {
    pub base_lipschitz: f64,
    pub defect: f64,
    pub dimension: usize,
    pub tau: f64,
    /// `L (1 + D h / (L τ))`.
    pub lipschitz: f64,
    /// `L τ + 2h`.
    pub deviation: f64,
}

impl SmoothingBudget {
    pub fn new(base_lipschitz: f64, defect: f64, dimension: usize, tau: f64) -> Self {
        let l = base_lipschitz;
        let lipschitz = if defect == 0.0 { l } else { l * (1.0 + dimension as f64 * defect / (l * tau)) };
        Self { base_lipschitz: l, defect, dimension, tau, lipschitz, deviation: l * tau + 2.0 * defect }
    }
}

pub struct SmoothedMap<F> {
    base: F,
    tau: f64,
    offsets: Vec<Point>,
    seed: u64,
    domain: Option<f64>,
    reach: f64,
    budget: Option<SmoothingBudget>,
}

/// Average of `map` over `x + τB`, with `B` the unit ball of `norm`, using
/// `samples` offsets (rounded up to an even count).
pub fn begun_smooth<F>(map: F, norm: &dyn Norm, tau: f64, samples: usize, seed: u64) -> Result<SmoothedMap<F>>
where
    F: Fn(&Point) -> Point,
{
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(invalid("smoothing radius τ must be positive"));
    }
    if samples == 0 {
        return Err(invalid("smoothing needs at least one sample"));
    }
    let mut rng = stream_rng(seed, 0);
    let half = samples.div_ceil(2);
    let mut offsets = Vec::with_capacity(2 * half);
    for _ in 0..half {
        let u = norm.sample_unit_ball(&mut rng) * tau;
        offsets.push(-&u);
        offsets.push(u);
    }
    let reach = offsets.iter().map(|u| u.amax()).fold(0.0, f64::max);
    Ok(SmoothedMap { base: map, tau, offsets, seed, domain: None, reach, budget: None })
}

impl<F> SmoothedMap<F>
where
    F: Fn(&Point) -> Point,
{
    /// The base map is defined on the cube `[-half_width, half_width]^D`;
    /// [`try_eval`](Self::try_eval) rejects points whose offsets leave it.
    pub fn with_domain(mut self, half_width: f64) -> Self {
        self.domain = Some(half_width);
        self
    }

    pub fn with_budget(mut self, budget: SmoothingBudget) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> usize {
        self.offsets.len()
    }

    pub fn budget(&self) -> Option<&SmoothingBudget> {
        self.budget.as_ref()
    }

    pub fn eval(&self, x: &Point) -> Point {
        let mut acc: Option<Point> = None;
        for u in &self.offsets {
            let y = (self.base)(&(x + u));
            match acc.as_mut() {
                Some(a) => *a += y,
                None => acc = Some(y),
            }
        }
        acc.expect("at least one offset") / self.offsets.len() as f64
    }

    pub fn try_eval(&self, x: &Point) -> Result<Point> {
        if let Some(w) = self.domain {
            if x.amax() + self.reach > w {
                return Err(Error::Precondition(format!(
                    "x + τB leaves the domain [-{w}, {w}]^{}",
                    x.len()
                )));
            }
        }
        Ok(self.eval(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};
    use nalgebra::DMatrix;

    #[test]
    fn linear_and_constant_maps_are_fixed() {
        let n = PNorm::new(PExponent::Inf, 3);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0, 0.0, 0.0, 1.0]);
        let s = begun_smooth(|x: &Point| &m * x, &n, 0.1, 64, 3).unwrap();
        let x = Point::from_vec(vec![0.2, -0.4, 1.0]);
        assert!((s.eval(&x) - &m * &x).amax() < 1e-14);
        let c = begun_smooth(|_: &Point| Point::from_vec(vec![1.0, 2.0]), &n, 0.1, 7, 3).unwrap();
        assert_eq!(c.eval(&x), Point::from_vec(vec![1.0, 2.0]));
        assert_eq!(c.samples(), 8);
    }

    #[test]
    fn domain_and_parameter_checks() {
        let n = PNorm::new(PExponent::Two, 2);
        assert!(begun_smooth(|x: &Point| x.clone(), &n, 0.0, 4, 0).is_err());
        let s = begun_smooth(|x: &Point| x.clone(), &n, 0.5, 4, 0).unwrap().with_domain(1.0);
        assert!(s.try_eval(&Point::from_vec(vec![0.9, 0.0])).is_err());
        assert!(s.try_eval(&Point::from_vec(vec![0.1, 0.0])).is_ok());
    }

    #[test]
    fn budget_formula() {
        let b = SmoothingBudget::new(1.5, 0.01, 9, 9.0 * 0.01 / 1.5);
        assert!((b.lipschitz - 3.0).abs() < 1e-12);
    }
}
