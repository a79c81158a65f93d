//! Batch experiment runner.
//!
//! `lipretract --config run.toml [--seed N] [--out DIR] [--dry-run] [--workers N]`
//! reads one experiment config, runs it and writes a JSON report plus a CSV
//! series into `DIR`. Exit status: 0 when every asserted bound holds, 1 when
//! one fails (the report is still written), 2 for a config that does not
//! validate (nothing is written).

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, Kind, SCHEMA_VERSION};
pub use report::{config_hash, Check, Report, Table};

use clap::Parser;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "lipretract", version, about = "Experiments on Lipschitz retractions onto convex compacta")]
pub struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Print the resolved plan and exit without running.
    #[arg(long)]
    pub dry_run: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;

/// Load and validate the config named by `args`, with command-line overrides applied.
pub fn load(args: &Args) -> crate::error::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| crate::error::Error::Schema(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

/// Run the CLI and return the process exit status.
pub fn main_with(args: Args) -> i32 {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SCHEMA;
        }
    };
    if let Some(w) = cfg.workers {
        crate::rng::set_workers(w);
    }
    let prepared = match run::prepare(&cfg) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SCHEMA;
        }
    };
    if args.dry_run {
        return match run::describe(&cfg, &prepared) {
            Ok(text) => {
                print!("{text}");
                EXIT_PASS
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_SCHEMA
            }
        };
    }
    let (report, table, compact) = match run::execute(&cfg, &prepared) {
        Ok(o) => (Report::new(&cfg, o.checks, o.result, None), Some(o.table), o.compact),
        Err(e) => (Report::new(&cfg, Vec::new(), serde_json::Value::Null, Some(e.to_string())), None, None),
    };
    let written = (|| {
        report::write(&args.out, &cfg.output.report, &report.to_json())?;
        if let Some(t) = &table {
            report::write(&args.out, &cfg.output.csv, &t.to_csv())?;
        }
        if let Some(c) = &compact {
            report::write(&args.out, &cfg.output.compact, c)?;
        }
        crate::error::Result::Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_FAIL;
    }
    for c in &report.checks {
        println!("{} {}: {} (bound {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.bound);
    }
    if let Some(e) = &report.error {
        println!("FAIL {e}");
    }
    if report.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
