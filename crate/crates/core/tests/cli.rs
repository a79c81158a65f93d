use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lipretract"))
}

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    bin().arg("--config").arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap()
}

fn out_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir.join("out")) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

const BUILD: &str = r#"
schema_version = 1
kind = "build-compact"
seed = 5

[space]
blocks = 6
ambient_rule = "l1"

[schedule]
rule = "default"

[budget]
samples = 500
"#;

#[test]
fn build_compact_passes_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run(a.path(), BUILD, &[]);
    let ob = run(b.path(), BUILD, &[]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    assert_eq!(out_files(a.path()), ["compact.json", "report.json", "series.csv"]);
    for f in ["report.json", "series.csv", "compact.json"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
    }
    let r = report(a.path());
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["kind"], "build-compact");
    assert_eq!(r["seed"], 5);
    assert_eq!(r["pass"], true);
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
    let csv = fs::read_to_string(a.path().join("out/series.csv")).unwrap();
    assert!(csv.starts_with("n,r,q,delta,alpha,A\n"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn seed_override_changes_the_hash_and_workers_do_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), BUILD, &["--workers", "1"]);
    run(b.path(), BUILD, &["--workers", "3"]);
    assert_eq!(report(a.path())["result"], report(b.path())["result"]);
    let c = tempfile::tempdir().unwrap();
    run(c.path(), BUILD, &["--seed", "6"]);
    let (ra, rc) = (report(a.path()), report(c.path()));
    assert_eq!(rc["seed"], 6);
    assert_ne!(ra["config_hash"], rc["config_hash"]);
}

#[test]
fn failing_bound_exits_one_and_still_writes() {
    let cfg = r#"
schema_version = 1
kind = "check-smallness"
seed = 1

[space]
blocks = 10
ambient_rule = "l1"

[schedule]
rule = "default"
"#;
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(d.path());
    assert_eq!(r["pass"], false);
    let checks = r["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 8);
    assert_eq!(checks[0]["pass"], true);
    assert!(checks[1..].iter().all(|c| c["pass"] == false));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn schema_errors_exit_two_and_write_nothing() {
    let bad = [
        "schema_version = 1\nkind = \"build-compact\"\n",
        "schema_version = 2\nkind = \"build-compact\"\nseed = 1\n",
        "schema_version = 1\nkind = \"warp-drive\"\nseed = 1\n",
        "schema_version = 1\nkind = \"build-compact\"\nseed = 1\ncolour = \"red\"\n",
        "schema_version = 1\nkind = \"build-compact\"\nseed = 1\n[budget]\npairs = 0\n",
        "schema_version = 1\nkind = \"estimate-lipschitz\"\nseed = 1\n[space]\nblocks = 3\nambient_rule = \"l2\"\n[lipschitz]\nmap = \"bogus\"\n",
        "this is = not = toml",
    ];
    for text in bad {
        let d = tempfile::tempdir().unwrap();
        let o = run(d.path(), text, &[]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(out_files(d.path()).is_empty(), "{text}");
        assert!(!o.stderr.is_empty());
    }
    let d = tempfile::tempdir().unwrap();
    let o = bin().arg("--config").arg(d.path().join("missing.toml")).arg("--out").arg(d.path().join("out")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

const PI: &str = r#"
schema_version = 1
kind = "pi-certificate"
seed = 7

[budget]
pairs = 2000

[pi]
samples = 500
"#;

#[test]
fn dry_run_prints_the_plan_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), PI, &["--dry-run"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("kind: pi-certificate"));
    assert!(text.contains("stages: 2"));
    assert_eq!(text.matches("τ_n = φ(n) h_n / L").count(), 2, "{text}");
    assert!(out_files(d.path()).is_empty());
}

#[test]
fn empty_depth_list_runs_no_stage() {
    let d = tempfile::tempdir().unwrap();
    let cfg = format!("{PI}depths = []\n");
    let dry = run(d.path(), &cfg, &["--dry-run"]);
    assert!(String::from_utf8_lossy(&dry.stdout).contains("stages: 0"));
    let o = run(d.path(), &cfg, &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(d.path());
    assert_eq!(r["result"]["stages"], 0);
    assert!(r["checks"].as_array().unwrap().is_empty());
}

#[test]
fn shipped_configs_validate() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let o = bin().arg("--config").arg(&p).arg("--dry-run").output().unwrap();
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
            n += 1;
        }
    }
    assert!(n >= 8);
}
