//! Audit of candidate retractions onto the assembled compact.
//!
//! A retraction `φ` onto `K` induces `F_n(x) = λ_n^{-1} (block n of φ(λ_n x))`
//! on `B_{E_n}`, a retraction onto the `n`-th tube with `|F_n| <= 2 M |φ|`.
//! Since no retraction onto the tube is `M_n`-Lipschitz, the induced
//! constants must exceed `M_n / (2M)` for some `n`. Sampling gives lower
//! estimates only: the audit records where a candidate's constants grow and
//! never proves that a retraction does not exist.

use super::bounds::{lind_bound, m_n};
use super::tube::AssembledCompact;
use crate::convex::ConvexBody;
use crate::error::{Error, Result};
use crate::metric::{estimate_lipschitz_between, PairSampler};
use crate::norm::{sample_p_ball, PExponent, PNorm, Point};
use crate::rng::{stream_rng, subseed};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub pairs: usize,
    /// Points of `K` checked for `φ(y) = y`.
    pub fix_samples: usize,
    pub fix_tol: f64,
    pub seed: u64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { pairs: 2000, fix_samples: 200, fix_tol: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub n: usize,
    pub dim: usize,
    pub lambda: f64,
    pub delta: f64,
    pub m_n: f64,
    /// `M_n / (2M)`.
    pub threshold: f64,
    /// Sampled Lipschitz constant of `F_n` (a lower estimate).
    pub estimate: f64,
    pub lind_bound: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub candidate: String,
    pub epsilon: f64,
    pub fdd_constant: f64,
    pub banach_mazur: f64,
    pub records: Vec<AuditRecord>,
    /// Some audited `n` has an induced constant of at least `M_n / (2M)`.
    pub consistent: bool,
    pub note: String,
}

/// Check that `candidate` fixes sampled points of `K` and maps sampled
/// points into `K`, then estimate the induced constants for each `n` in `ns`.
pub fn retraction_audit<F>(k: &AssembledCompact, candidate: F, name: &str, ns: &[usize], cfg: AuditConfig) -> Result<AuditReport>
where
    F: Fn(&Point) -> Point + Sync,
{
    let d = k.dim();
    let mut rng = stream_rng(cfg.seed, 0);
    for i in 0..cfg.fix_samples {
        let mut y = k.sample(&mut rng);
        if i % 2 == 1 {
            let g = k.gauge(&y);
            if g > 0.0 {
                y /= g;
            }
        }
        let err = (&candidate(&y) - &y).amax();
        if err > cfg.fix_tol * (1.0 + y.amax()) {
            return Err(Error::Witness {
                what: format!("candidate moves a point of K by {err:e}"),
                witness: y.as_slice().to_vec(),
            });
        }
    }
    for _ in 0..cfg.fix_samples {
        let x = sample_p_ball(PExponent::Inf, d, &mut rng) * (2.0 * rng.random::<f64>());
        let g = k.gauge(&candidate(&x));
        if g > 1.0 + 1e-9 {
            return Err(Error::Witness { what: format!("candidate leaves K (gauge {g})"), witness: x.as_slice().to_vec() });
        }
    }
    let m = k.fdd_constant();
    let bm = k.banach_mazur();
    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        if n == 0 || n > k.depth() {
            return Err(Error::IndexOutOfRange { index: n, lo: 1, hi: k.depth() });
        }
        let e_dim = k.space().prefix_dim(n);
        let lambda = k.lambda(n);
        let f_n = |x: &Point| k.component(&candidate(&(x * lambda)), n) / lambda;
        let base = move |rng: &mut crate::rng::SimRng| {
            let mut x = Point::zeros(d);
            x.rows_mut(0, e_dim).copy_from(&sample_p_ball(PExponent::Inf, e_dim, rng));
            x
        };
        // tube points and points just outside the tube, placed in block n
        let range = k.space().block_range(n);
        let tube = k.tube(n);
        let shell = move |rng: &mut crate::rng::SimRng| {
            let mut y = tube.sample(rng) * (1.0 + 0.25 * rng.random::<f64>() * rng.random::<f64>());
            let m = y.amax();
            if m > 1.0 {
                y /= m;
            }
            let mut x = Point::zeros(d);
            x.rows_mut(range.start, range.len()).copy_from(&y);
            x
        };
        let scale = Point::from_fn(d, |i, _| if i < e_dim { 1.0 } else { 0.0 });
        let sampler = PairSampler::new(d, base).with_local_scale(scale).with_shell(shell);
        let out = PNorm::new(PExponent::Inf, k.tube(n).dim());
        let rep = estimate_lipschitz_between(f_n, k.space(), &out, &sampler, cfg.pairs, subseed(cfg.seed, n as u64))?;
        let mn = m_n(n, k.epsilon(), bm)?;
        let threshold = mn / (2.0 * m);
        records.push(AuditRecord {
            n,
            dim: k.tube(n).dim(),
            lambda,
            delta: k.tube(n).delta,
            m_n: mn,
            threshold,
            estimate: rep.estimate,
            lind_bound: lind_bound(n)?,
            exceeds: rep.estimate >= threshold,
        });
    }
    Ok(AuditReport {
        candidate: name.into(),
        epsilon: k.epsilon(),
        fdd_constant: m,
        banach_mazur: bm,
        consistent: records.iter().any(|r| r.exceeds),
        records,
        note: "sampled constants are lower estimates; the audit is evidence, not a proof of non-existence".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauge_retraction_passes_the_fixes_audit() {
        let k = AssembledCompact::build(2, 0.5, None, None, 0).unwrap();
        let cfg = AuditConfig { pairs: 500, fix_samples: 50, ..Default::default() };
        let rep = retraction_audit(&k, |x: &Point| k.gauge_retraction(x), "gauge", &[1, 2], cfg).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert!(rep.consistent);
        // one-dimensional tube: F_1 is a retraction onto an interval
        assert!(rep.records[0].estimate >= 1.0 - 1e-9 && rep.records[0].estimate <= 2.0 + 1e-9);
    }

    #[test]
    fn non_retraction_is_rejected_with_witness() {
        let k = AssembledCompact::build(2, 0.5, None, None, 0).unwrap();
        let e = retraction_audit(&k, |x: &Point| x * 0.5, "half", &[1], AuditConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Witness { .. }));
    }

    #[test]
    fn nearest_point_candidate_runs() {
        let k = AssembledCompact::build(2, 0.5, None, None, 0).unwrap();
        let np = |x: &Point| k.nearest_point(x).0;
        let cfg = AuditConfig { pairs: 400, fix_samples: 20, fix_tol: 1e-9, seed: 1 };
        let rep = retraction_audit(&k, np, "nearest-point", &[1, 2], cfg).unwrap();
        assert!(rep.records.iter().all(|r| r.estimate.is_finite()));
    }
}
