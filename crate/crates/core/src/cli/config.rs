//! Experiment configuration files.
//!
//! A config is a TOML document with a `kind`, a mandatory `seed` and the
//! sections the kind reads:
//!
//! ```toml
//! schema_version = 1
//! kind = "check-smallness"
//! seed = 7
//!
//! [space]
//! blocks = 8
//! ambient_rule = "l1"
//!
//! [schedule]
//! rule = "default"
//!
//! [smallness]
//! epsilon = 0.5
//! ```
//!
//! Unknown keys are schema errors.

use crate::diamond::{default_schedule, schedule_for_delta, schedule_from_radii, DiamondCompact, RadiiSchedule};
use crate::error::{Error, Result};
use crate::smallness::small_schedule;
use crate::space::SpaceSpec;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    BuildCompact,
    EstimateLipschitz,
    CheckSmallness,
    NearestPoint,
    ExtractProjection,
    PiCertificate,
    CounterexampleAudit,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::BuildCompact => "build-compact",
            Kind::EstimateLipschitz => "estimate-lipschitz",
            Kind::CheckSmallness => "check-smallness",
            Kind::NearestPoint => "nearest-point",
            Kind::ExtractProjection => "extract-projection",
            Kind::PiCertificate => "pi-certificate",
            Kind::CounterexampleAudit => "counterexample-audit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: Kind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smallness: Option<SmallnessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nearest: Option<NearestSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<PiSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
}

/// Radii schedule: `rule` is `default`, `delta` (needs `delta`), `small`
/// (needs `epsilon`) or `radii` (needs `radii`). `r1` rescales the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
}

impl ScheduleSpec {
    pub fn build(&self, depth: usize) -> Result<RadiiSchedule> {
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::Schema(format!("schedule rule `{}` needs `{key}`", self.rule)));
        let s = match self.rule.as_str() {
            "default" => default_schedule(depth)?,
            "delta" => schedule_for_delta(need(self.delta, "delta")?, depth, None)?,
            "small" => small_schedule(depth, need(self.epsilon, "epsilon")?)?,
            "radii" => {
                let r = self.radii.clone().ok_or_else(|| Error::Schema("schedule rule `radii` needs `radii`".into()))?;
                if r.len() != depth {
                    return Err(Error::Schema(format!("{} radii for {depth} blocks", r.len())));
                }
                schedule_from_radii(r)?
            }
            other => return Err(Error::Schema(format!("unknown schedule rule `{other}`"))),
        };
        match self.r1 {
            Some(r1) => s.with_r1(r1),
            None => Ok(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Sampled pairs for Lipschitz estimates.
    pub pairs: usize,
    /// Sampled points for membership and identity checks.
    pub samples: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { pairs: 100_000, samples: 10_000 }
    }
}

/// File names inside the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub report: String,
    pub csv: String,
    /// Compact description, written by `build-compact` and `counterexample-audit`.
    pub compact: String,
}

impl Default for Output {
    fn default() -> Self {
        Self { report: "report.json".into(), csv: "series.csv".into(), compact: "compact.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSection {
    /// `identity`, `retraction`, `composite`, `gauge-retraction` or `radial`.
    pub map: String,
    /// Ball radius of `radial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Asserted upper bound; defaults to the theoretical constant of the map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Sampled points reach gauge level `spread`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    /// Block counts of the prefix models in the CSV series; defaults to the full depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallnessSection {
    #[serde(default = "half")]
    pub epsilon: f64,
    /// Defaults to the identity on `1..=min(depth, 8)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<usize>>,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearestSection {
    /// `auto` (Frank-Wolfe in Euclidean models), `fw` or `general`.
    #[serde(default = "auto")]
    pub method: String,
    /// Explicit query points; otherwise `queries` points of the ball of radius 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "hundred")]
    pub queries: usize,
    #[serde(default = "thousand")]
    pub iterations: usize,
}

fn auto() -> String {
    "auto".into()
}

fn hundred() -> usize {
    100
}

fn thousand() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSection {
    /// Row-major averaged operator in frame coordinates.
    pub matrix: Vec<Vec<f64>>,
    pub sigma: usize,
    pub lipschitz: f64,
    #[serde(default = "half")]
    pub epsilon: f64,
    #[serde(default = "tenth")]
    pub tol: f64,
}

fn tenth() -> f64 {
    0.1
}

/// Options of the π pipeline. Without `[space]` and `[schedule]` the toy
/// model is used. `depths` absent runs every `n`; an empty list runs none.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothed_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub require_small: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "two")]
    pub depth: usize,
    #[serde(default = "half")]
    pub epsilon: f64,
    /// `nearest-point` or `gauge`.
    #[serde(default = "nearest_point")]
    pub candidate: String,
    /// Indices audited; defaults to all blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default = "fifty")]
    pub fix_samples: usize,
}

fn two() -> usize {
    2
}

fn fifty() -> usize {
    50
}

fn nearest_point() -> String {
    "nearest-point".into()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        Ok(cfg)
    }

    /// Canonical JSON text of the resolved config; the report hash is taken over it.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn section<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::Schema(format!("kind `{}` needs a [{name}] section", self.kind.name())))
    }

    /// The diamond compact described by `[space]` and `[schedule]`,
    /// truncated to the first `depth` blocks when given.
    pub fn diamond(&self, depth: Option<usize>) -> Result<DiamondCompact> {
        let mut spec = self.section(&self.space, "space")?.clone();
        if let Some(k) = depth {
            if k == 0 || k > spec.blocks {
                return Err(Error::Schema(format!("depth {k} outside 1..={}", spec.blocks)));
            }
            spec.dims = spec.dims.map(|d| d[..k].to_vec());
            if let crate::space::BlockNormSpec::PerBlock(v) = &mut spec.block_norm {
                v.truncate(k);
            }
            spec.blocks = k;
        }
        let space = spec.build()?;
        let schedule = self.section(&self.schedule, "schedule")?.build(spec.blocks)?;
        DiamondCompact::new(space, schedule)
    }
}
