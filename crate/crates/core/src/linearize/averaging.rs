//! Derivative averaging over the box `B_{n,k} = r_n conv{±a_i : i <= σ} + δ_k Σ_{i>σ} [-a_i, a_i]`.
//!
//! Points of the box are handled in frame coordinates `c`, with the ambient
//! point `center + Σ c_i a_i`. Outputs are read back through the dual frame.

use crate::error::{invalid, Error, Result};
use crate::norm::{Norm, Point};
use crate::rng::{chunked, subseed, SimRng};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

const FRAME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingBox {
    sigma: usize,
    r_n: f64,
    delta_k: f64,
    /// Columns `a_1..a_g` in ambient coordinates.
    frame: DMatrix<f64>,
    /// Rows `a_1*..a_g*`.
    dual: DMatrix<f64>,
    center: Point,
}

/// Build the box after checking that the frame is normalized and
/// biorthogonal, and that its first `σ` pairs form an Auerbach system.
pub fn build_box(
    sigma: usize,
    frame: DMatrix<f64>,
    dual: DMatrix<f64>,
    r_n: f64,
    delta_k: f64,
    norm: &dyn Norm,
) -> Result<AveragingBox> {
    let g = frame.ncols();
    if sigma == 0 || sigma > g {
        return Err(invalid("σ must lie between 1 and the frame size"));
    }
    if dual.nrows() != g || dual.ncols() != frame.nrows() || norm.dim() != frame.nrows() {
        return Err(Error::DimensionMismatch { expected: frame.nrows(), got: dual.ncols() });
    }
    if !(r_n > 0.0) || !(delta_k >= 0.0) {
        return Err(invalid("box radii must be positive"));
    }
    let bio = &dual * &frame;
    if (bio - DMatrix::<f64>::identity(g, g)).amax() > FRAME_TOL {
        return Err(Error::Precondition("frame and dual frame are not biorthogonal".into()));
    }
    for i in 0..g {
        let a = frame.column(i).into_owned();
        if (norm.norm(&a) - 1.0).abs() > FRAME_TOL {
            return Err(Error::Precondition(format!("frame vector a_{} is not normalized", i + 1)));
        }
    }
    for i in 0..sigma {
        let f = dual.row(i).transpose();
        let dn = functional_norm(norm, &f);
        if (dn - 1.0).abs() > FRAME_TOL {
            return Err(Error::Precondition(format!(
                "a_{0}* has norm {dn}; the first σ pairs are not Auerbach",
                i + 1
            )));
        }
    }
    let center = Point::zeros(frame.nrows());
    Ok(AveragingBox { sigma, r_n, delta_k, frame, dual, center })
}

/// Norm of a functional: exact when the dual norm or the ball vertices are
/// known, otherwise a sampled lower estimate.
fn functional_norm(norm: &dyn Norm, f: &Point) -> f64 {
    if let Some(d) = norm.dual_norm(f) {
        return d;
    }
    if let Some(vs) = norm.unit_ball_vertices() {
        return vs.iter().map(|v| f.dot(v).abs()).fold(0.0, f64::max);
    }
    let mut rng = crate::rng::stream_rng(0, 0);
    (0..20_000)
        .map(|_| {
            let x = norm.sample_unit_ball(&mut rng);
            let n = norm.norm(&x);
            if n > 0.0 {
                f.dot(&x).abs() / n
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Box over the first `g` coordinate vectors of `R^dim`.
pub fn coordinate_box(sigma: usize, g: usize, norm: &dyn Norm, r_n: f64, delta_k: f64) -> Result<AveragingBox> {
    let d = norm.dim();
    if g > d {
        return Err(invalid("frame larger than the space"));
    }
    let frame = DMatrix::from_fn(d, g, |i, j| if i == j { 1.0 } else { 0.0 });
    build_box(sigma, frame.clone(), frame.transpose(), r_n, delta_k, norm)
}

impl AveragingBox {
    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn frame_dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn with_center(mut self, center: Point) -> Self {
        assert_eq!(center.len(), self.frame.nrows());
        self.center = center;
        self
    }

    /// Ambient point with frame coordinates `c`.
    pub fn point(&self, c: &Point) -> Point {
        &self.center + &self.frame * c
    }

    /// Frame coordinates of an output vector.
    pub fn coords(&self, y: &Point) -> Point {
        &self.dual * y
    }

    /// `λ(section_i) / λ(B) = σ / (2 r_n)` for the base directions.
    pub fn measure_ratio(&self) -> f64 {
        self.sigma as f64 / (2.0 * self.r_n)
    }

    /// `2^g r^σ δ^(g-σ) / σ!` in frame coordinates.
    pub fn volume(&self) -> f64 {
        let g = self.frame_dim();
        let fact: f64 = (1..=self.sigma).map(|k| k as f64).product();
        2f64.powi(g as i32) * self.r_n.powi(self.sigma as i32) * self.delta_k.powi((g - self.sigma) as i32) / fact
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r_n.max(self.delta_k)
    }

    fn sample_base(&self, skip: Option<usize>, c: &mut Point, rng: &mut SimRng) {
        let dims: Vec<usize> = (0..self.sigma).filter(|&i| Some(i) != skip).collect();
        let e: Vec<f64> = (0..=dims.len()).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        for (k, &i) in dims.iter().enumerate() {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[i] = s * self.r_n * e[k] / total;
        }
    }

    fn sample_cube(&self, skip: Option<usize>, c: &mut Point, rng: &mut SimRng) {
        for i in self.sigma..self.frame_dim() {
            if Some(i) != skip {
                c[i] = if self.delta_k > 0.0 { rng.random_range(-self.delta_k..=self.delta_k) } else { 0.0 };
            }
        }
    }

    /// Uniform point of the box, in frame coordinates.
    pub fn sample(&self, rng: &mut SimRng) -> Point {
        let mut c = Point::zeros(self.frame_dim());
        self.sample_base(None, &mut c, rng);
        self.sample_cube(None, &mut c, rng);
        c
    }

    /// Uniform point of the section orthogonal to `a_i` together with the
    /// half-length of the chord of the box through it along `a_i`:
    /// `r_n - Σ_{j != i, j <= σ} |a_j*(x)|` for base directions, `δ_k` otherwise.
    pub fn sample_section(&self, i: usize, rng: &mut SimRng) -> (Point, f64) {
        let mut c = Point::zeros(self.frame_dim());
        self.sample_base(if i < self.sigma { Some(i) } else { None }, &mut c, rng);
        self.sample_cube(Some(i), &mut c, rng);
        let half = if i < self.sigma {
            self.r_n - (0..self.sigma).filter(|&j| j != i).map(|j| c[j].abs()).sum::<f64>()
        } else {
            self.delta_k
        };
        (c, half.max(0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Centered finite differences at uniform points of the box.
    FiniteDifference,
    /// Endpoint differences along chords of the box (Fubini).
    Segment,
}

/// An averaged derivative `P(v) = (1/λ(B)) ∫_B dR(x)[v] dλ`, in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeAverage {
    /// Column `i` is the frame-coordinate image of `a_i`.
    pub matrix: DMatrix<f64>,
    /// For the segment estimator, the base columns normalized with the
    /// closed-form measure ratio `σ / (2 r_n)` instead of the sampled chord lengths.
    pub analytic: Option<DMatrix<f64>>,
    pub estimator: Estimator,
    pub samples: usize,
    pub step: f64,
}

/// Average of the derivative of `map` over the box, one column per frame
/// direction. The segment estimator falls back to finite differences in
/// the cube directions when `δ_k = 0`.
pub fn average_derivative<F>(
    map: F,
    bx: &AveragingBox,
    estimator: Estimator,
    samples: usize,
    seed: u64,
) -> Result<DerivativeAverage>
where
    F: Fn(&Point) -> Point + Sync,
{
    if samples == 0 {
        return Err(invalid("averaging needs at least one sample"));
    }
    let g = bx.frame_dim();
    let step = 1e-4 * bx.diameter();
    if !(step > 1e-300) {
        return Err(Error::Numerical("finite-difference step underflow".into()));
    }
    let eval = |c: &Point| bx.coords(&map(&bx.point(c)));
    let mut matrix = DMatrix::zeros(g, g);
    let mut analytic = None;
    let fd_column = |i: usize, seed: u64| -> Point {
        let parts = chunked(samples, seed, |rng, range| {
            let mut acc = Point::zeros(g);
            for _ in range {
                let c = bx.sample(rng);
                let mut up = c.clone();
                up[i] += step;
                let mut down = c;
                down[i] -= step;
                acc += (eval(&up) - eval(&down)) / (2.0 * step);
            }
            acc
        });
        parts.into_iter().fold(Point::zeros(g), |a, b| a + b) / samples as f64
    };
    match estimator {
        Estimator::FiniteDifference => {
            for i in 0..g {
                matrix.set_column(i, &fd_column(i, subseed(seed, i as u64)));
            }
        }
        Estimator::Segment => {
            let mut an = DMatrix::zeros(g, g);
            for i in 0..g {
                let s = subseed(seed, i as u64);
                if i >= bx.sigma && bx.delta_k == 0.0 {
                    log::debug!("flat box: finite differences for direction {}", i + 1);
                    let col = fd_column(i, s);
                    matrix.set_column(i, &col);
                    an.set_column(i, &col);
                    continue;
                }
                let parts = chunked(samples, s, |rng, range| {
                    let mut diff = Point::zeros(g);
                    let mut length = 0.0;
                    for _ in range {
                        let (c, half) = bx.sample_section(i, rng);
                        let mut up = c.clone();
                        up[i] += half;
                        let mut down = c;
                        down[i] -= half;
                        diff += eval(&up) - eval(&down);
                        length += 2.0 * half;
                    }
                    (diff, length)
                });
                let (diff, length) = parts
                    .into_iter()
                    .fold((Point::zeros(g), 0.0), |(d, l), (d2, l2)| (d + d2, l + l2));
                matrix.set_column(i, &(&diff / length));
                let ratio = if i < bx.sigma { bx.measure_ratio() } else { 1.0 / (2.0 * bx.delta_k) };
                an.set_column(i, &(diff * (ratio / samples as f64)));
            }
            analytic = Some(an);
        }
    }
    Ok(DerivativeAverage { matrix, analytic, estimator, samples, step })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::{PExponent, PNorm};
    use crate::rng::stream_rng;

    #[test]
    fn flat_segment_box() {
        let n = PNorm::new(PExponent::Inf, 1);
        let b = coordinate_box(1, 1, &n, 1.0, 0.0).unwrap();
        assert_eq!(b.volume(), 2.0);
        assert_eq!(b.measure_ratio(), 0.5);
        let n3 = PNorm::new(PExponent::Inf, 3);
        let b3 = coordinate_box(2, 3, &n3, 0.5, 0.0).unwrap();
        let mut rng = stream_rng(0, 0);
        for _ in 0..100 {
            let c = b3.sample(&mut rng);
            assert_eq!(c[2], 0.0);
            assert!(c[0].abs() + c[1].abs() <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn chord_half_lengths_use_absolute_values() {
        let n = PNorm::new(PExponent::Inf, 3);
        let b = coordinate_box(2, 3, &n, 1.0, 0.1).unwrap();
        let mut rng = stream_rng(2, 0);
        for _ in 0..200 {
            let (c, half) = b.sample_section(0, &mut rng);
            assert_eq!(c[0], 0.0);
            assert!((half - (1.0 - c[1].abs())).abs() < 1e-15);
            let mut end = c.clone();
            end[0] = half;
            assert!(end[0].abs() + end[1].abs() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn non_auerbach_frame_rejected() {
        let n = PNorm::new(PExponent::Inf, 2);
        let frame = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let dual = frame.clone().try_inverse().unwrap();
        // a_2 = (1, 1) has sup-norm one, but a_1* = (1, -1) has norm two
        assert!(build_box(1, frame, dual, 1.0, 0.1, &n).is_err());
    }

    #[test]
    fn linear_map_reproduced() {
        let n = PNorm::new(PExponent::Two, 3);
        let m = DMatrix::from_row_slice(3, 3, &[1.0, -2.0, 0.5, 0.0, 3.0, 1.0, 2.0, 0.0, -1.0]);
        let b = coordinate_box(2, 3, &n, 0.3, 0.01).unwrap();
        for est in [Estimator::Segment, Estimator::FiniteDifference] {
            let d = average_derivative(|x: &Point| &m * x, &b, est, 3000, 5).unwrap();
            assert!((&d.matrix - &m).amax() < 1e-9, "{est:?}");
        }
    }
}
