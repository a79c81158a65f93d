//! Report and CSV emission.

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// One asserted bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value <= bound }
    }

    /// `value >= bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, pass: value >= bound }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        let v = if pass { 1.0 } else { 0.0 };
        Self { name: name.into(), value: v, bound: 1.0, pass }
    }
}

/// A table written as CSV with one header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Format a float for CSV; shortest round-trip representation.
pub fn num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v:?}").unwrap();
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub pass: bool,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub result: serde_json::Value,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.canonical().as_bytes()))
}

impl Report {
    pub fn new(cfg: &ExperimentConfig, checks: Vec<Check>, result: serde_json::Value, error: Option<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: cfg.kind.name().into(),
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            workers: cfg.workers,
            pass: error.is_none() && checks.iter().all(|c| c.pass),
            checks,
            error,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn write(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["n", "value"]);
        t.push(vec!["1".into(), num(0.5)]);
        assert_eq!(t.to_csv(), "n,value\n1,0.5\n");
    }

    #[test]
    fn hash_tracks_the_config() {
        let a = ExperimentConfig::parse("schema_version = 1\nkind = \"build-compact\"\nseed = 3\n").unwrap();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 4;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn failing_check_fails_the_report() {
        let cfg = ExperimentConfig::parse("schema_version = 1\nkind = \"build-compact\"\nseed = 3\n").unwrap();
        let r = Report::new(&cfg, vec![Check::at_most("x", 2.0, 1.0)], serde_json::Value::Null, None);
        assert!(!r.pass);
    }
}
