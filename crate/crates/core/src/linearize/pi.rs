//! The π-property pipeline on a finite model.
//!
//! For each requested `n` the retraction `R` onto a diamond compact `K` is
//! pushed through: truncation to `E_n` (a nearest point map onto `E_n` in a
//! lattice norm), smoothing over `G_n` at `τ_n = φ(n) h_n / |R|`,
//! derivative averaging over boxes `B_{n,k}` for a ladder of thicknesses
//! `δ_k`, and extraction of `P̃_n = (P_n|_{E_n})^{-1} P_n`.
//!
//! `G_n` is the span of the first `min(φ(n), dim X)` coordinates, `E_n` the
//! span of the first `σ(n)`. The truncated model cannot contain the
//! distortion subspaces that make `λ(E_n, X) <= 2 λ(E_n, G_n) / (1 - ε)`
//! hold in general, so the `8L / (1 - ε)` line is reported, not proved.

use super::averaging::{average_derivative, coordinate_box, Estimator};
use super::extract::{extract_projection, operator_norm, FrameNorm, ProjectionCertificate};
use super::smoothing::{begun_smooth, SmoothingBudget};
use crate::diamond::DiamondCompact;
use crate::error::{Error, Result};
use crate::metric::{estimate_lipschitz, LipschitzReport, PairSampler};
use crate::norm::{Norm, PExponent, Point};
use crate::rng::subseed;
use crate::smallness::{check_small, phi, FundamentalSequence, SearchConfig, SmallnessCertificate};
use crate::space::BlockSpace;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PiConfig {
    pub epsilon: f64,
    pub sigma: Vec<usize>,
    /// Indices `n` (1-based into `sigma`) to run; empty means all.
    pub depths: Vec<usize>,
    pub ladder: Vec<f64>,
    /// Monte Carlo samples per frame direction and ladder rung.
    pub samples: usize,
    /// Offsets of the smoothing average.
    pub smoothing_samples: usize,
    /// Pairs used to estimate `|R|` when `lipschitz` is not given.
    pub lipschitz_pairs: usize,
    pub lipschitz: Option<f64>,
    /// Pairs used to estimate the Lipschitz constant of the smoothed map; 0 skips it.
    pub smoothed_pairs: usize,
    /// Slack of the `4L` and `8L / (1 - ε)` comparisons.
    pub tol: f64,
    /// Statistical slack of the seam bound.
    pub mc_tol: f64,
    pub require_small: bool,
    pub seed: u64,
}

impl Default for PiConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            sigma: vec![1, 2],
            depths: Vec::new(),
            ladder: vec![1e-1, 1e-2, 1e-3],
            samples: 100_000,
            smoothing_samples: 16,
            lipschitz_pairs: 100_000,
            lipschitz: None,
            smoothed_pairs: 0,
            tol: 0.1,
            mc_tol: 1e-3,
            require_small: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub delta: f64,
    /// `max_{i <= σ} |P(a_i) - a_i|` with the sampled chord normalization.
    pub seam_residual: f64,
    /// The same residual with the closed-form measure ratio `σ / (2 r_n)`.
    pub analytic_residual: f64,
    pub norm_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiRecord {
    pub n: usize,
    pub sigma_n: usize,
    pub phi: u64,
    pub frame_dim: usize,
    pub r: f64,
    pub h: f64,
    pub tau: f64,
    /// `h_n (φ(n) + 2)`.
    pub rho: f64,
    pub budget: SmoothingBudget,
    pub smoothed_lipschitz: Option<f64>,
    pub ladder: Vec<LadderRung>,
    /// Seam residuals do not grow as `δ_k` shrinks.
    pub trend_monotone: bool,
    /// `σ(n) h_n (φ(n) + 2) / r_n`.
    pub seam_bound: f64,
    pub seam_pass: bool,
    /// Largest entry of the difference between the finite-difference and
    /// segment averages at the smallest `δ_k`.
    pub fd_segment_discrepancy: f64,
    pub certificate: ProjectionCertificate,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiReport {
    pub epsilon: f64,
    pub sigma: Vec<usize>,
    pub lipschitz: f64,
    pub lipschitz_report: Option<LipschitzReport>,
    pub smallness: SmallnessCertificate,
    pub records: Vec<PiRecord>,
    /// `max_n |P̃_n|` over the records that produced a projection.
    pub uniform_bound: f64,
    pub bound_4l: f64,
    pub bound_8l: Option<f64>,
    pub verdict: bool,
}

/// The model used by the default pipeline: `l_inf` with nine
/// one-dimensional blocks and radii small for `ε = 1`, `σ = (1, 2)`.
pub fn toy_compact() -> Result<DiamondCompact> {
    let space = BlockSpace::one_dimensional(9, PExponent::Inf)?;
    DiamondCompact::new(space, crate::smallness::small_schedule(9, 1.0)?)
}

/// Run the pipeline for `retraction` onto `compact`. Failures of a single
/// `n` are recorded in its diagnostics; only configuration errors abort.
pub fn pi_certificate<R>(compact: &DiamondCompact, retraction: R, cfg: &PiConfig) -> Result<PiReport>
where
    R: Fn(&Point) -> Point + Sync,
{
    let space = compact.space();
    if !space.is_lattice() {
        return Err(Error::Unsupported("truncation onto E_n needs a lattice norm".into()));
    }
    if cfg.ladder.is_empty() || cfg.ladder.iter().any(|d| !(*d > 0.0)) {
        return Err(crate::error::invalid("ladder thicknesses must be positive"));
    }
    let d = space.total_dim();
    let beta = FundamentalSequence::coordinate(d);
    let smallness = check_small(compact, &beta, cfg.epsilon, &cfg.sigma, SearchConfig { seed: cfg.seed, ..Default::default() })?;
    if cfg.require_small && !smallness.verdict {
        return Err(Error::Precondition("the compact is not small for the given ε and σ".into()));
    }
    let (lipschitz, lipschitz_report) = match cfg.lipschitz {
        Some(l) => (l, None),
        None => {
            let rep = estimate_lipschitz(
                &retraction,
                space,
                &compact.pair_sampler(3.0),
                cfg.lipschitz_pairs,
                subseed(cfg.seed, 1),
            )?;
            (rep.estimate.max(1.0), Some(rep))
        }
    };
    let depths: Vec<usize> = if cfg.depths.is_empty() { (1..=cfg.sigma.len()).collect() } else { cfg.depths.clone() };
    let mut records = Vec::new();
    for &n in &depths {
        if n == 0 || n > cfg.sigma.len() {
            return Err(Error::IndexOutOfRange { index: n, lo: 1, hi: cfg.sigma.len() });
        }
        let rec = smallness.record(n).expect("record per n");
        records.push(run_depth(compact, &retraction, cfg, n, rec.sigma_n, rec.r, rec.h, lipschitz)?);
    }
    let uniform_bound = records
        .iter()
        .filter(|r| r.certificate.invertible)
        .map(|r| r.certificate.norm_estimate)
        .fold(0.0, f64::max);
    let verdict = !records.is_empty() && records.iter().all(|r| r.pass);
    Ok(PiReport {
        epsilon: cfg.epsilon,
        sigma: cfg.sigma.clone(),
        lipschitz,
        lipschitz_report,
        smallness,
        records,
        uniform_bound,
        bound_4l: 4.0 * lipschitz,
        bound_8l: (cfg.epsilon < 1.0).then(|| 8.0 * lipschitz / (1.0 - cfg.epsilon)),
        verdict,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_depth<R>(
    compact: &DiamondCompact,
    retraction: &R,
    cfg: &PiConfig,
    n: usize,
    sigma_n: usize,
    r: f64,
    h: f64,
    lipschitz: f64,
) -> Result<PiRecord>
where
    R: Fn(&Point) -> Point + Sync,
{
    let space = compact.space();
    let d = space.total_dim();
    let phi_n = phi(sigma_n, cfg.epsilon)?;
    let g = (phi_n as usize).min(d);
    let mut diagnostics = Vec::new();
    if g < phi_n as usize {
        diagnostics.push(format!("G_n truncated to {g} coordinates (φ(n) = {phi_n})"));
    }
    let g_space = space.coordinate_subspace(g)?;
    let pad = |c: &Point| {
        let mut x = Point::zeros(d);
        x.rows_mut(0, c.len()).copy_from(c);
        x
    };
    // G_n -> E_n, written in the coordinates of G_n
    let base = |c: &Point| BlockSpace::truncate_coords(&retraction(&pad(c)), sigma_n).rows(0, g).into_owned();
    let tau = phi_n as f64 * h / lipschitz;
    let rho = h * (phi_n as f64 + 2.0);
    let budget = SmoothingBudget::new(lipschitz, h, g, tau);
    let seed = subseed(cfg.seed, 100 + n as u64);
    let smoothed = if tau > 0.0 {
        Some(begun_smooth(base, &g_space, tau, cfg.smoothing_samples, subseed(seed, 0))?.with_budget(budget))
    } else {
        diagnostics.push("h_n = 0: no smoothing".into());
        None
    };
    let map_g = |c: &Point| match &smoothed {
        Some(s) => s.eval(c),
        None => base(c),
    };
    let map = |x: &Point| pad(&map_g(&x.rows(0, g).into_owned()));

    let smoothed_lipschitz = if cfg.smoothed_pairs > 0 {
        let radius = r + cfg.ladder.iter().cloned().fold(0.0, f64::max);
        let sampler = PairSampler::in_ball(&g_space, radius);
        Some(estimate_lipschitz(&map_g, &g_space, &sampler, cfg.smoothed_pairs, subseed(seed, 1))?.estimate)
    } else {
        None
    };

    let frame = DMatrix::from_fn(d, g, |i, j| if i == j { 1.0 } else { 0.0 });
    let frame_norm = FrameNorm { ambient: space, frame };
    let residual = |m: &DMatrix<f64>| {
        (0..sigma_n)
            .map(|i| {
                let mut e = Point::zeros(g);
                e[i] = 1.0;
                frame_norm.norm(&(m.column(i) - e))
            })
            .fold(0.0, f64::max)
    };
    let mut ladder = Vec::new();
    let mut last = None;
    for (k, &delta) in cfg.ladder.iter().enumerate() {
        let bx = coordinate_box(sigma_n, g, space, r, delta)?;
        let avg = average_derivative(&map, &bx, Estimator::Segment, cfg.samples, subseed(seed, 10 + k as u64))?;
        let (norm_estimate, _) = operator_norm(&avg.matrix, &frame_norm, &frame_norm, subseed(seed, 20 + k as u64));
        ladder.push(LadderRung {
            delta,
            seam_residual: residual(&avg.matrix),
            analytic_residual: avg.analytic.as_ref().map_or(f64::NAN, residual),
            norm_estimate,
        });
        last = Some((bx, avg));
    }
    let (bx, seg) = last.expect("non-empty ladder");
    let mut order: Vec<&LadderRung> = ladder.iter().collect();
    order.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let trend_monotone = order.windows(2).all(|w| w[1].seam_residual <= w[0].seam_residual + cfg.mc_tol);
    if !trend_monotone {
        diagnostics.push("seam residual grows along the δ_k ladder".into());
    }
    let fd = average_derivative(&map, &bx, Estimator::FiniteDifference, cfg.samples, subseed(seed, 30))?;
    let fd_segment_discrepancy = (&fd.matrix - &seg.matrix).amax();

    let seam_bound = sigma_n as f64 * rho / r;
    let seam_residual = ladder.iter().find(|l| l.delta == bx.delta_k()).map_or(f64::NAN, |l| l.seam_residual);
    let seam_pass = seam_residual <= seam_bound + cfg.mc_tol;
    if !seam_pass {
        diagnostics.push(format!("seam residual {seam_residual:e} exceeds σ h (φ + 2) / r = {seam_bound:e}"));
    }
    let certificate = extract_projection(&seg.matrix, sigma_n, &frame_norm, lipschitz, cfg.epsilon, cfg.tol);
    diagnostics.extend(certificate.diagnostics.iter().cloned());
    let pass = certificate.pass() && seam_pass;
    Ok(PiRecord {
        n,
        sigma_n,
        phi: phi_n,
        frame_dim: g,
        r,
        h,
        tau,
        rho,
        budget,
        smoothed_lipschitz,
        ladder,
        trend_monotone,
        seam_bound,
        seam_pass,
        fd_segment_discrepancy,
        certificate,
        pass,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_is_small_with_expected_phi() {
        let k = toy_compact().unwrap();
        let beta = FundamentalSequence::coordinate(9);
        let c = check_small(&k, &beta, 1.0, &[1, 2], SearchConfig::default()).unwrap();
        assert!(c.verdict);
        assert_eq!(phi(1, 1.0).unwrap(), 3);
        assert_eq!(phi(2, 1.0).unwrap(), 9);
    }

    #[test]
    fn small_run_passes() {
        let k = toy_compact().unwrap();
        let cfg = PiConfig { samples: 2000, lipschitz_pairs: 5000, ..Default::default() };
        let rep = pi_certificate(&k, |x: &Point| k.retract(x), &cfg).unwrap();
        assert_eq!(rep.records.len(), 2);
        for r in &rep.records {
            assert!(r.certificate.pass_projection, "{:?}", r.diagnostics);
            assert!((r.budget.lipschitz - 2.0 * rep.lipschitz).abs() < 1e-9 * rep.lipschitz);
            assert_eq!(r.rho, r.h * (r.phi as f64 + 2.0));
        }
        assert!(rep.verdict, "{:#?}", rep.records.iter().map(|r| &r.diagnostics).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_depth_one() {
        // one block: E = G, so P̃ is the identity
        let space = BlockSpace::one_dimensional(1, PExponent::Inf).unwrap();
        let k = DiamondCompact::new(space, crate::diamond::default_schedule(1).unwrap()).unwrap();
        let cfg = PiConfig { sigma: vec![1], samples: 500, lipschitz: Some(1.0), require_small: false, ..Default::default() };
        let rep = pi_certificate(&k, |x: &Point| k.retract(x), &cfg).unwrap();
        let c = &rep.records[0].certificate;
        assert_eq!(rep.records[0].frame_dim, 1);
        assert!((c.norm_estimate - 1.0).abs() < 1e-9);
        assert!(c.pass());
    }

    #[test]
    fn not_small_is_rejected() {
        let space = BlockSpace::one_dimensional(4, PExponent::Inf).unwrap();
        let k = DiamondCompact::new(space, crate::diamond::default_schedule(4).unwrap()).unwrap();
        let cfg = PiConfig { epsilon: 0.5, sigma: vec![1, 2, 3], ..Default::default() };
        assert!(matches!(pi_certificate(&k, |x: &Point| k.retract(x), &cfg), Err(Error::Precondition(_))));
    }
}
