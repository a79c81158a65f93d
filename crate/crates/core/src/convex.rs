//! Convex bodies given by a Minkowski gauge.

use crate::norm::{Norm, Point};
use crate::rng::SimRng;

/// A closed convex set containing the origin, described by its gauge
/// `mu(x) = inf { t > 0 : x / t in K }`.
pub trait ConvexBody: Send + Sync {
    fn dim(&self) -> usize;

    /// The norm of the surrounding space.
    fn ambient(&self) -> &dyn Norm;

    fn gauge(&self, x: &Point) -> f64;

    /// A subgradient of the gauge at `x`. The default is a central difference.
    fn gauge_subgradient(&self, x: &Point) -> Point {
        let h = 1e-7 * (1.0 + x.amax());
        let mut g = Point::zeros(x.len());
        let mut y = x.clone();
        for i in 0..x.len() {
            let xi = y[i];
            y[i] = xi + h;
            let up = self.gauge(&y);
            y[i] = xi - h;
            let down = self.gauge(&y);
            y[i] = xi;
            g[i] = (up - down) / (2.0 * h);
        }
        g
    }

    fn contains(&self, x: &Point) -> bool {
        self.gauge(x) <= 1.0
    }

    /// A random point of the body. Not required to be volume-uniform.
    fn sample(&self, rng: &mut SimRng) -> Point;

    fn is_symmetric(&self) -> bool {
        true
    }

    /// Closed-form inner radius of `K ∩ span{e_1..e_n}` for the coordinate
    /// fundamental sequence, when the body knows it.
    fn analytic_inner_radius(&self, _n: usize) -> Option<f64> {
        None
    }

    /// Closed-form height `sup_{x in K} d(x, span{e_1..e_n})` for the
    /// coordinate fundamental sequence, when the body knows it.
    fn analytic_height(&self, _n: usize) -> Option<f64> {
        None
    }

    /// Minkowski retraction `x / max(1, mu(x))`.
    fn gauge_retraction(&self, x: &Point) -> Point {
        let g = self.gauge(x);
        if g <= 1.0 {
            x.clone()
        } else {
            x / g
        }
    }
}

/// The closed ball of radius `radius` of a norm.
pub struct NormBall<N> {
    pub norm: N,
    pub radius: f64,
}

impl<N: Norm> ConvexBody for NormBall<N> {
    fn dim(&self) -> usize {
        self.norm.dim()
    }
    fn ambient(&self) -> &dyn Norm {
        &self.norm
    }
    fn gauge(&self, x: &Point) -> f64 {
        self.norm.norm(x) / self.radius
    }
    fn gauge_subgradient(&self, x: &Point) -> Point {
        self.norm.subgradient(x) / self.radius
    }
    fn sample(&self, rng: &mut SimRng) -> Point {
        self.norm.sample_unit_ball(rng) * self.radius
    }
}
