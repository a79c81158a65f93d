//! Diamond compacta `K = conv(∪ r_k B_{X_k})` and their Lipschitz retractions.
//!
//! On an `N`-block space the gauge of `K` is `sum_i |x_i| / r_i`. The
//! retraction is built from the factor maps `F_{n,m}`, which either keep a
//! point, drop its blocks from `m` on, or shorten block `m` so that the
//! partial gauge becomes exactly one. The composite `F_{n,1} ∘ ... ∘ F_{n,n} ∘ P_n`
//! has a closed form, [`DiamondCompact::retract`].
//!
//! All bounds checked by this crate are realized on the truncation `K_N`.
//! The products and tails defining the Lipschitz budget are summable, so the
//! budget does not depend on `N` and a deeper truncation never loosens it.

use crate::convex::ConvexBody;
use crate::error::{invalid, Error, Result};
use crate::metric::PairSampler;
use crate::norm::{Norm, Point};
use crate::rng::SimRng;
use crate::space::BlockSpace;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

/// Radii `r_n` together with the auxiliary sequences that control the
/// Lipschitz constant of the diamond retraction. All vectors are indexed
/// from block 1 (`v[0]` is the value for `n = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiiSchedule {
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub delta: Vec<f64>,
    pub a: Vec<f64>,
    /// Infinite tails `alpha_n = sum_{k > n} a_k A_k` of the untruncated schedule.
    pub alpha: Vec<f64>,
    #[serde(rename = "A")]
    pub big_a: Vec<f64>,
    pub target_delta: f64,
}

fn default_big_a(n: usize) -> Vec<f64> {
    (1..=n).map(BlockSpace::a_m_default).collect()
}

impl RadiiSchedule {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Value at 1-based index `n`.
    pub fn radius(&self, n: usize) -> f64 {
        self.r[n - 1]
    }

    /// Tail `sum_{k = n+1}^{N} a_k A_k` of the truncated schedule; zero at `n = N`.
    pub fn truncated_alpha(&self, n: usize) -> f64 {
        (n..self.len()).map(|k| self.a[k] * self.big_a[k]).sum()
    }

    /// Multiply every radius by `r1 / r_1`.
    pub fn with_r1(mut self, r1: f64) -> Result<Self> {
        if !(r1 > 0.0) {
            return Err(invalid("r_1 must be positive"));
        }
        let s = r1 / self.r[0];
        self.r.iter_mut().for_each(|r| *r *= s);
        Ok(self)
    }

    /// The constant `1 + delta` of the Schauder-basis bound; multiply by 5
    /// for blocks of dimension above one.
    pub fn lipschitz_budget(&self) -> f64 {
        1.0 + self.target_delta
    }

    /// Recheck the structural invariants by direct recomputation.
    pub fn verify(&self) -> Result<()> {
        let n = self.len();
        let lens = [self.q.len(), self.delta.len(), self.a.len(), self.alpha.len(), self.big_a.len()];
        if n == 0 || lens.iter().any(|&l| l != n) {
            return Err(invalid("schedule sequences must share a positive length"));
        }
        for i in 0..n {
            if !(self.r[i] > 0.0) {
                return Err(invalid(format!("r_{} is not positive", i + 1)));
            }
            if i > 0 {
                if self.r[i] > self.r[i - 1] {
                    return Err(invalid(format!("r_{} exceeds r_{}", i + 1, i)));
                }
                if self.r[i] / self.r[i - 1] > self.q[i] * (1.0 + 1e-12) {
                    return Err(invalid(format!("r_{0}/r_{1} exceeds q_{0}", i + 1, i)));
                }
            }
            if self.alpha[i] > self.delta[i] / 2.0 * (1.0 + 1e-12) {
                return Err(invalid(format!("alpha_{} exceeds delta_{}/2", i + 1, i + 1)));
            }
        }
        let prod: f64 = self.delta.iter().map(|d| 1.0 + d).product();
        if prod > (1.0 + self.target_delta) * (1.0 + 1e-12) {
            return Err(invalid("product of (1 + delta_n) exceeds 1 + delta"));
        }
        Ok(())
    }
}

/// `q_n = 1/(n 2^(n+1))`, `delta_n = 2^(1-n)`, `a_k = 1/(k 2^(k+1))`,
/// `alpha_n = 2^-n`, `A_m = 2m`, `r_1 = 1`, `r_n = r_{n-1} q_n`.
pub fn default_schedule(n: usize) -> Result<RadiiSchedule> {
    if n == 0 {
        return Err(invalid("schedule depth must be at least 1"));
    }
    let q: Vec<f64> = (1..=n).map(|k| 1.0 / (k as f64 * 2f64.powi(k as i32 + 1))).collect();
    let mut r = vec![1.0; n];
    for k in 1..n {
        r[k] = r[k - 1] * q[k];
    }
    // the infinite product prod (1 + 2^(1-n)) converges after a few dozen terms
    let target: f64 = (1..=64).map(|k| 1.0 + 2f64.powi(1 - k)).product::<f64>() - 1.0;
    Ok(RadiiSchedule {
        r,
        a: q.clone(),
        q,
        delta: (1..=n).map(|k| 2f64.powi(1 - k as i32)).collect(),
        alpha: (1..=n).map(|k| 2f64.powi(-(k as i32))).collect(),
        big_a: default_big_a(n),
        target_delta: target,
    })
}

/// Schedule with `prod (1 + delta_n) <= 1 + delta`: with `c = ln(1 + delta)`,
/// `delta_n = c 2^-n`, `a_k = c 2^(-k-1) / A_k` (so `alpha_n = delta_n / 2`),
/// and `q_n = min{a_n, delta_n / (2 A_{n-1})}`, `q_1 = a_1`.
pub fn schedule_for_delta(delta: f64, n: usize, big_a: Option<&[f64]>) -> Result<RadiiSchedule> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("delta must be positive"));
    }
    if n == 0 {
        return Err(invalid("schedule depth must be at least 1"));
    }
    let big_a = match big_a {
        Some(a) if a.len() == n && a.iter().all(|&v| v >= 1.0) => a.to_vec(),
        Some(_) => return Err(invalid("A must have one entry >= 1 per block")),
        None => default_big_a(n),
    };
    let c = delta.ln_1p();
    let dn: Vec<f64> = (1..=n).map(|k| c * 2f64.powi(-(k as i32))).collect();
    let a: Vec<f64> = (1..=n).map(|k| c * 2f64.powi(-(k as i32) - 1) / big_a[k - 1]).collect();
    let mut q = a.clone();
    for k in 1..n {
        q[k] = a[k].min(dn[k] / (2.0 * big_a[k - 1]));
    }
    let mut r = vec![1.0; n];
    for k in 1..n {
        r[k] = r[k - 1] * q[k];
    }
    Ok(RadiiSchedule {
        r,
        q,
        alpha: (1..=n).map(|k| c * 2f64.powi(-(k as i32) - 1)).collect(),
        delta: dn,
        a,
        big_a,
        target_delta: delta,
    })
}

/// Schedule for prescribed radii. The auxiliary sequences are the tightest
/// ones compatible with `r`: `q_n = r_n / r_{n-1}`, `delta_n = 2 A_{n-1} q_n`.
pub fn schedule_from_radii(r: Vec<f64>) -> Result<RadiiSchedule> {
    let n = r.len();
    if n == 0 || r.iter().any(|&v| !(v > 0.0)) || r.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("radii must be positive and nonincreasing"));
    }
    let big_a = default_big_a(n);
    let mut q = vec![0.25; n];
    let mut delta = vec![0.5; n];
    for k in 1..n {
        q[k] = r[k] / r[k - 1];
        delta[k] = 2.0 * big_a[k - 1] * q[k];
    }
    let a = q.clone();
    let alpha: Vec<f64> = (0..n).map(|k| (k + 1..n).map(|j| a[j] * big_a[j]).sum()).collect();
    let delta: Vec<f64> = delta.iter().zip(&alpha).map(|(d, al)| d.max(2.0 * al)).collect();
    let target = delta.iter().map(|d| 1.0 + d).product::<f64>() - 1.0;
    Ok(RadiiSchedule { r, q, delta, a, alpha, big_a, target_delta: target })
}

/// Below this fraction of `r_m` a block is treated as zero in the closed form.
const BLOCK_GUARD: f64 = 1e-14;

/// `conv(∪ r_k B_{X_k})` on a block space with one radius per block.
#[derive(Debug, Clone, PartialEq)]
pub struct DiamondCompact {
    space: BlockSpace,
    schedule: RadiiSchedule,
}

impl DiamondCompact {
    pub fn new(space: BlockSpace, schedule: RadiiSchedule) -> Result<Self> {
        if schedule.len() != space.block_count() {
            return Err(Error::DimensionMismatch { expected: space.block_count(), got: schedule.len() });
        }
        schedule.verify()?;
        Ok(Self { space, schedule })
    }

    pub fn space(&self) -> &BlockSpace {
        &self.space
    }

    pub fn schedule(&self) -> &RadiiSchedule {
        &self.schedule
    }

    pub fn depth(&self) -> usize {
        self.space.block_count()
    }

    /// `r_k` for block `k` (1-based).
    pub fn radius(&self, k: usize) -> f64 {
        self.schedule.radius(k)
    }

    fn check_depth(&self, n: usize, lo: usize) -> Result<()> {
        if n < lo || n > self.depth() {
            return Err(Error::IndexOutOfRange { index: n, lo, hi: self.depth() });
        }
        Ok(())
    }

    /// `sum_{i <= m} |x_i| / r_i`.
    pub fn partial_gauge(&self, x: &Point, m: usize) -> f64 {
        (1..=m).map(|i| self.space.block_norm(x, i) / self.radius(i)).sum()
    }

    /// Gauge of `K_n` evaluated on the first `n` blocks.
    pub fn gauge_at(&self, x: &Point, n: usize) -> Result<f64> {
        self.space.check(x)?;
        self.check_depth(n, 0)?;
        Ok(self.partial_gauge(x, n))
    }

    /// `f_1 = r_1` and `f_m(x) = r_m (1 - sum_{i<m} |x_i| / r_i)`.
    pub fn f_m(&self, x: &Point, m: usize) -> Result<f64> {
        self.space.check(x)?;
        self.check_depth(m, 1)?;
        Ok(self.f_unchecked(x, m))
    }

    fn f_unchecked(&self, x: &Point, m: usize) -> f64 {
        if m == 1 {
            return self.radius(1);
        }
        self.radius(m) * (1.0 - self.partial_gauge(x, m - 1))
    }

    /// Lipschitz constant `r_m A_{m-1} / r_{m-1}` of `f_m` (zero for `m = 1`).
    pub fn f_m_lipschitz_bound(&self, m: usize) -> f64 {
        if m == 1 {
            return 0.0;
        }
        self.radius(m) * self.schedule.big_a[m - 2] / self.radius(m - 1)
    }

    /// Whether `x` lies in `E_{n,m} = P_m(X) ∪ K_n`.
    pub fn in_e_nm(&self, x: &Point, n: usize, m: usize) -> bool {
        let k = self.space.prefix_dim(m);
        x.as_slice()[k..].iter().all(|&v| v == 0.0) || self.partial_gauge(x, n) <= 1.0 + 1e-12
    }

    /// The factor map `F_{n,m}` on `E_{n,m}`.
    pub fn f_nm(&self, x: &Point, n: usize, m: usize) -> Result<Point> {
        self.space.check(x)?;
        self.check_depth(n, 1)?;
        if m == 0 || m > n {
            return Err(Error::IndexOutOfRange { index: m, lo: 1, hi: n });
        }
        if !self.in_e_nm(x, n, m) {
            return Err(Error::Precondition(format!(
                "point is neither supported on blocks <= {m} nor inside K_{n}"
            )));
        }
        Ok(self.f_nm_unchecked(x, m))
    }

    fn f_nm_unchecked(&self, x: &Point, m: usize) -> Point {
        let before = self.partial_gauge(x, m - 1);
        let with_m = before + self.space.block_norm(x, m) / self.radius(m);
        if with_m <= 1.0 {
            return x.clone();
        }
        let mut y = BlockSpace::truncate_coords(x, self.space.prefix_dim(m - 1));
        if before >= 1.0 {
            return y;
        }
        let norm_m = self.space.block_norm(x, m);
        let f = self.f_unchecked(x, m);
        let range = self.space.block_range(m);
        for c in range {
            y[c] = x[c] / norm_m * f;
        }
        y
    }

    /// `F_{n,1} ∘ ... ∘ F_{n,n} ∘ P_n` evaluated factor by factor, with `n = N`.
    pub fn retract_composite(&self, x: &Point) -> Point {
        let n = self.depth();
        let mut y = x.clone();
        for m in (1..=n).rev() {
            y = self.f_nm_unchecked(&y, m);
        }
        y
    }

    /// Closed form of the retraction onto `K_N`: with `m` the first block at
    /// which the partial gauge exceeds one, keep blocks `< m` and shorten
    /// block `m` to `f_m(x)`; points of `K_N` are returned unchanged.
    pub fn retract(&self, x: &Point) -> Point {
        let mut before = 0.0;
        for m in 1..=self.depth() {
            let norm_m = self.space.block_norm(x, m);
            let r_m = self.radius(m);
            let with_m = before + norm_m / r_m;
            if with_m > 1.0 {
                let mut y = BlockSpace::truncate_coords(x, self.space.prefix_dim(m - 1));
                if norm_m <= BLOCK_GUARD * r_m {
                    log::debug!("block {m} below guard in retraction; returning P_(m-1) x");
                    return y;
                }
                let f = if m == 1 { r_m } else { r_m * (1.0 - before) };
                for c in self.space.block_range(m) {
                    y[c] = x[c] / norm_m * f;
                }
                return y;
            }
            before = with_m;
        }
        x.clone()
    }

    /// `x ↦ x_n` clamped to `r_n B_{X_n}`: a retraction of `K` onto the block ball.
    pub fn block_ball_retraction(&self, x: &Point, n: usize) -> Result<Point> {
        self.space.check(x)?;
        self.check_depth(n, 1)?;
        if self.partial_gauge(x, self.depth()) > 1.0 + 1e-9 {
            return Err(Error::Precondition("point lies outside K".into()));
        }
        let mut y = Point::zeros(x.len());
        let range = self.space.block_range(n);
        let norm_n = self.space.block_norm(x, n);
        let scale = if norm_n > self.radius(n) { self.radius(n) / norm_n } else { 1.0 };
        for c in range {
            y[c] = x[c] * scale;
        }
        Ok(y)
    }

    /// Per-coordinate radius `r_{block(c)}`, the natural scale for local perturbations.
    pub fn coordinate_scales(&self) -> Point {
        Point::from_fn(self.space.total_dim(), |c, _| self.radius(self.space.block_of_coord(c)))
    }

    /// A point with gauge exactly `level` (up to rounding).
    pub fn sample_at_gauge(&self, level: f64, rng: &mut SimRng) -> Point {
        let y = self.sample(rng);
        let g = self.partial_gauge(&y, self.depth());
        if g > 0.0 {
            y * (level / g)
        } else {
            y
        }
    }

    /// A point on the seam `sum_{i <= m} |x_i| / r_i ≈ 1` of `F_{n,m}`, with
    /// random mass beyond block `m`.
    pub fn sample_seam(&self, rng: &mut SimRng) -> Point {
        let n = self.depth();
        let m = rng.random_range(1..=n);
        let mut x = self.sample(rng);
        let head = self.partial_gauge(&x, m);
        let k = rng.random_range(3..=12);
        let wobble = 1.0 + (2.0 * rng.random::<f64>() - 1.0) * 10f64.powi(-k);
        let cut = self.space.prefix_dim(m);
        let s = if head > 0.0 { wobble / head } else { 1.0 };
        let tail_scale = 2.0 * rng.random::<f64>();
        for c in 0..x.len() {
            x[c] *= if c < cut { s } else { tail_scale };
        }
        x
    }

    /// Pair sampler mixing points of `s K` with `s` up to `spread`, seam
    /// points, and local pairs at scales proportional to the block radii.
    pub fn pair_sampler(&self, spread: f64) -> PairSampler<'_> {
        let shell = move |rng: &mut SimRng| self.sample_seam(rng);
        PairSampler::new(self.space.total_dim(), move |rng| {
            let level = spread * rng.random::<f64>();
            self.sample_at_gauge(level, rng)
        })
        .with_shell(shell)
        .with_local_scale(self.coordinate_scales())
        .with_scale_range(1e-9, 1.0)
    }
}

impl ConvexBody for DiamondCompact {
    fn dim(&self) -> usize {
        self.space.total_dim()
    }

    fn ambient(&self) -> &dyn Norm {
        &self.space
    }

    fn gauge(&self, x: &Point) -> f64 {
        self.partial_gauge(x, self.depth())
    }

    fn gauge_subgradient(&self, x: &Point) -> Point {
        let mut g = Point::zeros(x.len());
        for i in 1..=self.depth() {
            let r = self.space.block_range(i);
            let gs = &mut g.as_mut_slice()[r.clone()];
            self.space.blocks()[i - 1].norm.subgradient_into(&x.as_slice()[r], gs);
            gs.iter_mut().for_each(|v| *v /= self.radius(i));
        }
        g
    }

    /// Convex combination `sum w_i r_i u_i` with `u_i` on the unit sphere of
    /// block `i` and `(w, slack)` uniform on the simplex.
    fn sample(&self, rng: &mut SimRng) -> Point {
        let n = self.depth();
        let e: Vec<f64> = (0..=n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = e.iter().sum();
        let mut x = Point::zeros(self.space.total_dim());
        for i in 1..=n {
            let u = self.space.sample_block_sphere(i, rng);
            x += u * (self.radius(i) * e[i - 1] / total);
        }
        x
    }

    /// Centered ball: a ball `B(c, rho)` inside a symmetric `K` forces
    /// `B(-c, rho)` and hence `B(0, rho)` inside. With p-sum ambient norm the
    /// radius is `1 / |(1/r_k)_{k meets E_n}|_{p*}`.
    fn analytic_inner_radius(&self, n: usize) -> Option<f64> {
        if n == 0 || n > self.space.total_dim() {
            return None;
        }
        let last = self.space.block_of_coord(n - 1);
        let cut = self.space.prefix_dim(last) != n;
        if cut && !self.space.blocks()[last - 1].norm.is_lattice(self.space.blocks()[last - 1].dim) {
            return None;
        }
        let inv: Vec<f64> = (1..=last).map(|k| 1.0 / self.radius(k)).collect();
        Some(1.0 / self.space.ambient_rule().dual().eval(&inv))
    }

    /// For lattice block norms `d(x, E_n)` is the norm of the coordinates
    /// beyond `n`; it is maximized at `r_k u` with `k` the block holding
    /// coordinate `n + 1`.
    fn analytic_height(&self, n: usize) -> Option<f64> {
        if n >= self.space.total_dim() {
            return Some(0.0);
        }
        if !self.space.is_lattice() {
            return None;
        }
        Some(self.radius(self.space.block_of_coord(n)))
    }
}

/// `x ↦ n R(x / n)`: a retraction onto `n K` with the Lipschitz constant of `R`.
pub fn rescaled_family<R>(retraction: R, n: usize) -> impl Fn(&Point) -> Point
where
    R: Fn(&Point) -> Point,
{
    assert!(n >= 1, "rescaling factor must be at least 1");
    let t = n as f64;
    move |x: &Point| retraction(&(x / t)) * t
}
