//! Pipelines behind each experiment kind.

use super::config::{ExperimentConfig, Kind};
use super::report::{num, Check, Table};
use crate::convex::ConvexBody;
use crate::counterexample::{retraction_audit, AssembledCompact, AuditConfig};
use crate::diamond::DiamondCompact;
use crate::error::{Error, Result};
use crate::linearize::{extract_projection, pi_certificate, toy_compact, FrameNorm, PiConfig};
use crate::metric::{estimate_lipschitz, radial_projection};
use crate::norm::{Norm, Point};
use crate::proximity::{nearest_point_fw, nearest_point_general, GeneralConfig};
use crate::rng::{stream_rng, subseed};
use crate::smallness::{check_small, identity_sigma, phi, FundamentalSequence, SearchConfig};
use crate::space::SpaceSpec;
use nalgebra::DMatrix;
use serde_json::json;

/// Slack of asserted Lipschitz bounds.
const LIP_TOL: f64 = 1e-6;

/// Everything a run needs, built and validated before any file is written.
pub enum Prepared {
    Build(DiamondCompact),
    Lipschitz { map: String, radius: f64, bound: Option<f64>, spread: f64, models: Vec<DiamondCompact> },
    Smallness { compact: DiamondCompact, epsilon: f64, sigma: Vec<usize> },
    Nearest { compact: DiamondCompact, fw: bool, points: Vec<Point>, iterations: usize },
    Extract { space: crate::space::BlockSpace, matrix: DMatrix<f64>, sigma: usize, lipschitz: f64, epsilon: f64, tol: f64 },
    Pi { compact: DiamondCompact, cfg: PiConfig, stages: bool },
    Audit { compact: AssembledCompact, candidate: String, ns: Vec<usize>, fix_samples: usize },
}

pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: serde_json::Value,
    pub table: Table,
    /// Text of the compact description file, when the kind writes one.
    pub compact: Option<String>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(schema(format!("`{key}` must be positive")))
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    if cfg.budget.pairs == 0 || cfg.budget.samples == 0 {
        return Err(schema("budget.pairs and budget.samples must be positive"));
    }
    Ok(match cfg.kind {
        Kind::BuildCompact => Prepared::Build(cfg.diamond(None)?),
        Kind::EstimateLipschitz => {
            let s = cfg.section(&cfg.lipschitz, "lipschitz")?;
            if !["identity", "retraction", "composite", "gauge-retraction", "radial"].contains(&s.map.as_str()) {
                return Err(schema(format!("unknown map `{}`", s.map)));
            }
            let full = cfg.section(&cfg.space, "space")?.blocks;
            let depths = s.depths.clone().unwrap_or_else(|| vec![full]);
            if depths.is_empty() {
                return Err(schema("`lipschitz.depths` must not be empty"));
            }
            let models = depths.iter().map(|&d| cfg.diamond(Some(d))).collect::<Result<Vec<_>>>()?;
            Prepared::Lipschitz {
                map: s.map.clone(),
                radius: positive(s.radius.unwrap_or(1.0), "lipschitz.radius")?,
                bound: s.bound,
                spread: positive(s.spread.unwrap_or(3.0), "lipschitz.spread")?,
                models,
            }
        }
        Kind::CheckSmallness => {
            let compact = cfg.diamond(None)?;
            let s = cfg.smallness.clone().unwrap_or(super::config::SmallnessSection { epsilon: 0.5, sigma: None });
            crate::smallness::check_epsilon(s.epsilon)?;
            let sigma = s.sigma.unwrap_or_else(|| identity_sigma(compact.depth().min(8)));
            crate::smallness::check_sigma(&sigma)?;
            if sigma.last().is_some_and(|&m| m > compact.space().total_dim()) {
                return Err(schema("σ exceeds the dimension of the space"));
            }
            Prepared::Smallness { compact, epsilon: s.epsilon, sigma }
        }
        Kind::NearestPoint => {
            let compact = cfg.diamond(None)?;
            let s = cfg.section(&cfg.nearest, "nearest")?;
            let euclid = compact.space().is_euclidean_model();
            let fw = match s.method.as_str() {
                "auto" => euclid,
                "fw" if euclid => true,
                "fw" => return Err(schema("method `fw` needs the Euclidean model")),
                "general" => false,
                m => return Err(schema(format!("unknown method `{m}`"))),
            };
            let d = compact.space().total_dim();
            let points = match &s.points {
                Some(p) => {
                    if p.iter().any(|v| v.len() != d) {
                        return Err(schema(format!("query points must have {d} coordinates")));
                    }
                    p.iter().map(|v| Point::from_vec(v.clone())).collect()
                }
                None => {
                    let mut rng = stream_rng(subseed(cfg.seed, 2), 0);
                    (0..s.queries).map(|_| compact.space().sample_unit_ball(&mut rng) * 2.0).collect()
                }
            };
            if s.iterations == 0 {
                return Err(schema("`nearest.iterations` must be positive"));
            }
            Prepared::Nearest { compact, fw, points, iterations: s.iterations }
        }
        Kind::ExtractProjection => {
            let s = cfg.section(&cfg.extract, "extract")?;
            let space = cfg.section(&cfg.space, "space")?.build()?;
            let g = s.matrix.len();
            if g == 0 || s.matrix.iter().any(|r| r.len() != g) {
                return Err(schema("`extract.matrix` must be a non-empty square matrix"));
            }
            if g != space.total_dim() {
                return Err(schema(format!("matrix size {g} differs from the space dimension {}", space.total_dim())));
            }
            if s.sigma == 0 || s.sigma > g {
                return Err(schema(format!("`extract.sigma` must lie in 1..={g}")));
            }
            crate::smallness::check_epsilon(s.epsilon)?;
            Prepared::Extract {
                matrix: DMatrix::from_fn(g, g, |i, j| s.matrix[i][j]),
                space,
                sigma: s.sigma,
                lipschitz: positive(s.lipschitz, "extract.lipschitz")?,
                epsilon: s.epsilon,
                tol: s.tol,
            }
        }
        Kind::PiCertificate => {
            let compact = if cfg.space.is_some() || cfg.schedule.is_some() { cfg.diamond(None)? } else { toy_compact()? };
            let s = cfg.pi.clone().unwrap_or_default();
            let d = PiConfig::default();
            let pc = PiConfig {
                epsilon: s.epsilon.unwrap_or(d.epsilon),
                sigma: s.sigma.unwrap_or(d.sigma),
                depths: s.depths.clone().unwrap_or_default(),
                ladder: s.ladder.unwrap_or(d.ladder),
                samples: s.samples.unwrap_or(d.samples),
                smoothing_samples: s.smoothing_samples.unwrap_or(d.smoothing_samples),
                lipschitz_pairs: cfg.budget.pairs,
                lipschitz: s.lipschitz,
                smoothed_pairs: s.smoothed_pairs.unwrap_or(d.smoothed_pairs),
                tol: s.tol.unwrap_or(d.tol),
                mc_tol: d.mc_tol,
                require_small: s.require_small.unwrap_or(d.require_small),
                seed: cfg.seed,
            };
            crate::smallness::check_epsilon(pc.epsilon)?;
            crate::smallness::check_sigma(&pc.sigma)?;
            if pc.sigma.last().is_some_and(|&m| m > compact.space().total_dim()) {
                return Err(schema("σ exceeds the dimension of the space"));
            }
            if pc.depths.iter().any(|&n| n == 0 || n > pc.sigma.len()) {
                return Err(schema(format!("`pi.depths` entries must lie in 1..={}", pc.sigma.len())));
            }
            if pc.ladder.is_empty() || pc.ladder.iter().any(|v| !(*v > 0.0)) {
                return Err(schema("`pi.ladder` must hold positive thicknesses"));
            }
            if !compact.space().is_lattice() {
                return Err(schema("the π pipeline needs a lattice norm"));
            }
            let stages = s.depths.as_ref().is_none_or(|v| !v.is_empty());
            Prepared::Pi { compact, cfg: pc, stages }
        }
        Kind::CounterexampleAudit => {
            let s = cfg.section(&cfg.audit, "audit")?;
            if !["nearest-point", "gauge"].contains(&s.candidate.as_str()) {
                return Err(schema(format!("unknown candidate `{}`", s.candidate)));
            }
            if s.depth == 0 {
                return Err(schema("`audit.depth` must be positive"));
            }
            let compact = AssembledCompact::build(s.depth, s.epsilon, s.delta.clone(), s.lambda.clone(), cfg.seed)?;
            let ns = s.ns.clone().unwrap_or_else(|| (1..=s.depth).collect());
            if ns.iter().any(|&n| n == 0 || n > s.depth) {
                return Err(schema(format!("`audit.ns` entries must lie in 1..={}", s.depth)));
            }
            Prepared::Audit { compact, candidate: s.candidate.clone(), ns, fix_samples: s.fix_samples }
        }
    })
}

/// The theoretical constant of a map onto a diamond compact.
fn default_bound(map: &str, k: &DiamondCompact) -> Option<f64> {
    let delta = k.schedule().target_delta;
    match map {
        "identity" => Some(1.0),
        "radial" => Some(2.0),
        "retraction" | "composite" if k.space().dims().iter().all(|&d| d == 1) => Some(1.0 + delta),
        "retraction" | "composite" => Some(5.0 * (1.0 + delta)),
        _ => None,
    }
}

/// Resolved parameters of a run, without executing it.
pub fn describe(cfg: &ExperimentConfig, p: &Prepared) -> Result<String> {
    let mut s = format!("kind: {}\nseed: {}\nworkers: {}\n", cfg.kind.name(), cfg.seed, cfg.workers.map_or("default".into(), |w| w.to_string()));
    let mut line = |t: String| {
        s.push_str(&t);
        s.push('\n');
    };
    match p {
        Prepared::Build(k) => {
            line(format!("depth: {}  dims: {:?}  ambient: {}", k.depth(), k.space().dims(), k.space().ambient_rule().tag()));
            line(format!("radii: {:?}", k.schedule().r));
            line(format!("identity samples: {}", cfg.budget.samples));
        }
        Prepared::Lipschitz { map, bound, models, .. } => {
            line(format!("map: {map}  pairs per model: {}", cfg.budget.pairs));
            for k in models {
                let b = bound.or_else(|| default_bound(map, k));
                line(format!("depth {}: bound {}", k.depth(), b.map_or("none".into(), |b| format!("{b}"))));
            }
        }
        Prepared::Smallness { compact, epsilon, sigma } => {
            line(format!("depth: {}  ε: {epsilon}  σ: {sigma:?}", compact.depth()));
            for (i, &m) in sigma.iter().enumerate() {
                line(format!("n = {}: σ(n) = {m}  φ(n) = {}  bound = {:e}", i + 1, phi(m, *epsilon)?, crate::smallness::smallness_bound(m, *epsilon)?));
            }
        }
        Prepared::Nearest { compact, fw, points, iterations } => {
            line(format!("depth: {}  solver: {}  queries: {}  iterations: {iterations}", compact.depth(), if *fw { "frank-wolfe" } else { "general" }, points.len()));
        }
        Prepared::Extract { matrix, sigma, lipschitz, epsilon, tol, .. } => {
            line(format!("frame dim: {}  σ: {sigma}  L: {lipschitz}  ε: {epsilon}  tol: {tol}", matrix.nrows()));
            line(format!("bound 4L = {}", 4.0 * lipschitz));
        }
        Prepared::Pi { compact, cfg: pc, stages } => {
            let d = compact.space().total_dim();
            let (l, source) = match pc.lipschitz {
                Some(l) => (l, "configured"),
                None => (compact.schedule().lipschitz_budget(), "schedule budget; the run estimates it"),
            };
            line(format!("depth: {}  ε: {}  σ: {:?}  L = {l} ({source})", compact.depth(), pc.epsilon, pc.sigma));
            line(format!("ladder: {:?}  samples: {}  smoothing samples: {}", pc.ladder, pc.samples, pc.smoothing_samples));
            let depths: Vec<usize> = if !stages {
                Vec::new()
            } else if pc.depths.is_empty() {
                (1..=pc.sigma.len()).collect()
            } else {
                pc.depths.clone()
            };
            line(format!("stages: {}", depths.len()));
            let beta = FundamentalSequence::coordinate(d);
            let cert = check_small(compact, &beta, pc.epsilon, &pc.sigma, SearchConfig { seed: pc.seed, ..Default::default() })?;
            for n in depths {
                let rec = cert.record(n).expect("record per n");
                let ph = phi(rec.sigma_n, pc.epsilon)?;
                line(format!(
                    "n = {n}: σ(n) = {}  φ(n) = {ph}  dim G = {}  r = {:e}  h = {:e}  τ_n = φ(n) h_n / L = {:e}",
                    rec.sigma_n,
                    (ph as usize).min(d),
                    rec.r,
                    rec.h,
                    ph as f64 * rec.h / l
                ));
            }
        }
        Prepared::Audit { compact, candidate, ns, .. } => {
            line(format!("depth: {}  ε: {}  candidate: {candidate}  n: {ns:?}", compact.depth(), compact.epsilon()));
            for &n in ns {
                let t = compact.tube(n);
                line(format!("n = {n}: d(n) = {}  δ = {}  λ = {:e}", t.dim(), t.delta, compact.lambda(n)));
            }
        }
    }
    Ok(s)
}

fn identity_check(k: &DiamondCompact, samples: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let mut moved = 0.0f64;
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let y = k.sample(&mut rng);
        moved = moved.max((k.retract(&y) - &y).amax());
        let x = k.space().sample_unit_ball(&mut rng) * 2.0;
        worst = worst.max(k.gauge(&k.retract(&x)));
    }
    (moved, worst)
}

pub fn execute(cfg: &ExperimentConfig, p: &Prepared) -> Result<Outcome> {
    let seed = cfg.seed;
    match p {
        Prepared::Build(k) => {
            k.schedule().verify()?;
            let (moved, worst) = identity_check(k, cfg.budget.samples, subseed(seed, 1));
            let mut table = Table::new(&["n", "r", "q", "delta", "alpha", "A"]);
            let s = k.schedule();
            for i in 0..s.len() {
                table.push(vec![(i + 1).to_string(), num(s.r[i]), num(s.q[i]), num(s.delta[i]), num(s.alpha[i]), num(s.big_a[i])]);
            }
            let compact = json!({ "space": SpaceSpec::of(k.space()), "schedule": s });
            Ok(Outcome {
                checks: vec![Check::at_most("max |R(x) - x| on K", moved, 0.0), Check::at_most("max gauge(R(x)) on 2B", worst, 1.0 + 1e-9)],
                result: json!({ "depth": k.depth(), "identity_error": moved, "max_gauge": worst }),
                table,
                compact: Some(serde_json::to_string_pretty(&compact).expect("serializes") + "\n"),
            })
        }
        Prepared::Lipschitz { map, radius, bound, spread, models } => {
            let mut checks = Vec::new();
            let mut rows = Vec::new();
            let mut table = Table::new(&["depth", "estimate", "bound"]);
            for k in models {
                let space = k.space();
                let f = |x: &Point| match map.as_str() {
                    "identity" => x.clone(),
                    "retraction" => k.retract(x),
                    "composite" => k.retract_composite(x),
                    "gauge-retraction" => k.gauge_retraction(x),
                    _ => radial_projection(space, x, *radius),
                };
                let sampler = k.pair_sampler(*spread);
                let rep = estimate_lipschitz(f, space, &sampler, cfg.budget.pairs, subseed(seed, k.depth() as u64))?;
                let b = bound.or_else(|| default_bound(map, k));
                if let Some(b) = b {
                    checks.push(Check::at_most(format!("Lipschitz estimate at depth {}", k.depth()), rep.estimate, b + LIP_TOL));
                }
                table.push(vec![k.depth().to_string(), num(rep.estimate), b.map_or(String::new(), num)]);
                rows.push(json!({ "depth": k.depth(), "bound": b, "report": rep }));
            }
            Ok(Outcome { checks, result: json!({ "map": map, "models": rows }), table, compact: None })
        }
        Prepared::Smallness { compact, epsilon, sigma } => {
            let beta = FundamentalSequence::coordinate(compact.space().total_dim());
            let cert = check_small(compact, &beta, *epsilon, sigma, SearchConfig { seed, ..Default::default() })?;
            let mut table = Table::new(&["n", "sigma_n", "r", "h", "ratio", "bound", "pass", "method"]);
            let mut checks = Vec::new();
            for r in &cert.records {
                table.push(vec![r.n.to_string(), r.sigma_n.to_string(), num(r.r), num(r.h), num(r.ratio), num(r.bound), r.pass.to_string(), r.method.clone()]);
                checks.push(Check { name: format!("0 < h/r <= bound at n = {}", r.n), value: r.ratio, bound: r.bound, pass: r.pass });
            }
            Ok(Outcome { checks, result: serde_json::to_value(&cert).expect("serializes"), table, compact: None })
        }
        Prepared::Nearest { compact, fw, points, iterations } => {
            let mut table = Table::new(&["query", "distance", "iterations", "residual", "converged", "gauge"]);
            let mut all_converged = true;
            let mut worst = 0.0f64;
            let mut results = Vec::new();
            for (i, x) in points.iter().enumerate() {
                let r = if *fw {
                    nearest_point_fw(x, compact, *iterations)?
                } else {
                    let gc = GeneralConfig { seed: subseed(seed, i as u64), ..Default::default() };
                    nearest_point_general(x, compact, compact.space(), gc)?
                };
                let g = compact.gauge(&r.point);
                all_converged &= r.converged;
                worst = worst.max(g);
                table.push(vec![i.to_string(), num(r.distance), r.iterations.to_string(), num(r.residual), r.converged.to_string(), num(g)]);
                results.push(json!({
                    "x": x.as_slice(), "point": r.point.as_slice(), "distance": r.distance,
                    "iterations": r.iterations, "residual": r.residual, "converged": r.converged,
                    "dispersion": r.dispersion, "note": r.note,
                }));
            }
            Ok(Outcome {
                checks: vec![Check::flag("all queries converged", all_converged), Check::at_most("max gauge of answers", worst, 1.0 + 1e-9)],
                result: json!({ "solver": if *fw { "frank-wolfe" } else { "general" }, "queries": results }),
                table,
                compact: None,
            })
        }
        Prepared::Extract { space, matrix, sigma, lipschitz, epsilon, tol } => {
            let g = matrix.nrows();
            let frame_norm = FrameNorm { ambient: space, frame: DMatrix::identity(g, g) };
            let cert = extract_projection(matrix, *sigma, &frame_norm, *lipschitz, *epsilon, *tol);
            let mut table = Table::with_header(std::iter::once("row".to_string()).chain((1..=g).map(|j| format!("c{j}"))).collect());
            if let Some(m) = &cert.matrix {
                for (i, row) in m.iter().enumerate() {
                    table.push(std::iter::once((i + 1).to_string()).chain(row.iter().map(|v| num(*v))).collect());
                }
            }
            let checks = vec![
                Check::flag("P̃ is a projection onto E", cert.pass_projection),
                Check::at_most("|P̃| <= 4L + tol", cert.norm_estimate, cert.bound_4l + tol),
                Check::flag("2|P̃| / (1 - ε) <= 8L / (1 - ε) + tol", cert.pass_8l),
            ];
            Ok(Outcome { checks, result: serde_json::to_value(&cert).expect("serializes"), table, compact: None })
        }
        Prepared::Pi { compact, cfg: pc, stages } => {
            let mut table = Table::new(&["n", "sigma_n", "phi", "frame_dim", "r", "h", "tau", "norm", "bound_4l", "pass"]);
            if !stages {
                return Ok(Outcome { checks: Vec::new(), result: json!({ "stages": 0 }), table, compact: None });
            }
            let rep = pi_certificate(compact, |x: &Point| compact.retract(x), pc)?;
            let mut checks = Vec::new();
            for r in &rep.records {
                table.push(vec![
                    r.n.to_string(),
                    r.sigma_n.to_string(),
                    r.phi.to_string(),
                    r.frame_dim.to_string(),
                    num(r.r),
                    num(r.h),
                    num(r.tau),
                    num(r.certificate.norm_estimate),
                    num(r.certificate.bound_4l),
                    r.pass.to_string(),
                ]);
                checks.push(Check::flag(format!("projection certificate at n = {}", r.n), r.pass));
            }
            checks.push(Check::flag("π verdict", rep.verdict));
            Ok(Outcome { checks, result: serde_json::to_value(&rep).expect("serializes"), table, compact: None })
        }
        Prepared::Audit { compact, candidate, ns, fix_samples } => {
            let ac = AuditConfig { pairs: cfg.budget.pairs, fix_samples: *fix_samples, fix_tol: 1e-9, seed };
            let rep = if candidate == "gauge" {
                retraction_audit(compact, |x: &Point| compact.gauge_retraction(x), candidate, ns, ac)?
            } else {
                retraction_audit(compact, |x: &Point| compact.nearest_point(x).0, candidate, ns, ac)?
            };
            let mut table = Table::new(&["n", "dim", "lambda", "delta", "m_n", "threshold", "estimate", "lind_bound", "exceeds"]);
            for r in &rep.records {
                table.push(vec![
                    r.n.to_string(),
                    r.dim.to_string(),
                    num(r.lambda),
                    num(r.delta),
                    num(r.m_n),
                    num(r.threshold),
                    num(r.estimate),
                    num(r.lind_bound),
                    r.exceeds.to_string(),
                ]);
            }
            let checks = vec![Check::flag("some n has an induced constant of at least M_n / (2M)", rep.consistent)];
            let desc = serde_json::to_string_pretty(&compact.describe()).expect("serializes") + "\n";
            Ok(Outcome { checks, result: serde_json::to_value(&rep).expect("serializes"), table, compact: Some(desc) })
        }
    }
}
