use std::fs;
use std::path::{Path, PathBuf};

use acd_core::cli::{run_with, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn acd(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("acd").chain(args.iter().copied()), &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from\n{text}"))
        .parse()
        .unwrap()
}

const RIDGE: &str = "[problem]\nkind = \"ridge\"\nn = 16\nseed = 1\ncurvature = 1.0\n";

#[test]
fn solve_ridge_ccd_reaches_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{RIDGE}[solver]\nengine = \"ccd\"\nepochs = 200\n"));
    let out = dir.path().join("out");
    let r = acd(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}{}", r.out, r.err);
    for f in ["trace.txt", "series.csv", "summary.txt", "report.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary_value(&summary, "final_gap") <= 1e-8);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    assert!(series.starts_with("t,F,H,A,grad_err_sq,dx_sq\n"));
    assert_eq!(series.lines().count(), 1 + 1 + 16 * 200);
}

#[test]
fn shipped_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, name) in [
        ("solve", "ridge_ccd.toml"),
        ("solve", "ridge_pacd.toml"),
        ("market", "market_ces.toml"),
        ("market", "market_leontief.toml"),
    ] {
        let out = dir.path().join(name);
        let cfg = configs().join(name);
        let r = acd(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(r.code, EXIT_OK, "{name}: {}{}", r.out, r.err);
    }
}

#[test]
fn missing_problem_file_is_usage_error_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "problem_file = \"nowhere.toml\"\n");
    let out = dir.path().join("out");
    let r = acd(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(!out.exists());
    let r = acd(&["solve", "--config", dir.path().join("absent.toml").to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE);
}

#[test]
fn problem_file_resolves_next_to_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "p.toml", "kind = \"lasso\"\nn = 8\nseed = 3\nreg_weight = 0.2\n");
    let cfg = write(dir.path(), "c.toml", "problem_file = \"p.toml\"\n[solver]\nengine = \"scd\"\nt_bar = 4000\n");
    let out = dir.path().join("out");
    let r = acd(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(fs::read_to_string(out.join("trace.txt")).unwrap().contains("# seed = 5"));
}

#[test]
fn low_gamma_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{RIDGE}[solver]\nengine = \"ccd\"\nepochs = 5\ngamma = 0.5\n"));
    let out = dir.path().join("out");
    let r = acd(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE);
    assert!(r.err.contains("--force"));
    assert!(!out.exists());
    let r = acd(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--force"]);
    assert!(r.err.contains("warning"), "{}", r.err);
    assert!(out.join("trace.txt").exists());
    // Far below the rule the guarantees break, and the audit says so.
    assert_eq!(r.code, EXIT_FAILED);
}

#[test]
fn verify_contract() {
    let r = acd(&["verify", "--samples", "0"]);
    assert_eq!(r.code, EXIT_USAGE);
    let r = acd(&["verify", "--suite", "nope"]);
    assert_eq!(r.code, EXIT_USAGE);
    let r = acd(&["verify", "--suite", "appendixF"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    assert!(r.out.starts_with("# lower-bound family audits"));
    assert!(!r.out.contains("prox oracle"));
    assert_eq!(acd(&["verify", "--suite", "lower-bound"]).out, r.out);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let r = acd(&["verify", "--samples", "300", "--seed", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    for title in ["# prox oracle", "# lemma suite", "# lower-bound family audits", "# gradient and demand identities"] {
        assert!(r.out.contains(title), "{title}");
    }
    assert_eq!(fs::read_to_string(out.join("verify.txt")).unwrap(), r.out);
}

#[test]
fn verify_reads_config_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", "seed = 9\n[verify]\nsamples = 50\n");
    let r = acd(&["verify", "--config", cfg.to_str().unwrap(), "--suite", "prox"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("seed=9 samples=50"), "{}", r.out);
}

#[test]
fn market_large_step_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("market_ces.toml")).unwrap().replace("lambda = 0.02702702702702703", "lambda = 0.3");
    let cfg = write(dir.path(), "m.toml", &text);
    let out = dir.path().join("out");
    let r = acd(&["market", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE, "{}", r.err);
    let r = acd(&["market", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--force"]);
    assert!(r.err.contains("1/37"), "{}", r.err);
    assert_ne!(r.code, EXIT_USAGE);
    let prices = fs::read_to_string(out.join("prices.csv")).unwrap();
    assert!(prices.starts_with("# lambda = 0.3\n"));
    assert!(prices.contains("\nt,j,p_before,p_after,z_tilde,z_min,z_max\n"));
}

#[test]
fn bench_sweeps_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.toml",
        "seed = 2\n[problem]\nkind = \"sparse\"\nn = 500\ndegree = 4\nseed = 2\n[solver]\nengine = \"sacd\"\nt_bar = 30000\n[bench]\nworkers = [1, 2, 3, 4]\ntarget_ratio = 1e-3\n",
    );
    let out = dir.path().join("out");
    let r = acd(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, EXIT_OK, "{}{}", r.out, r.err);
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "1");
    assert_eq!(rows[0][8], "1.0");
    assert!(rows.iter().all(|r| r[6] == "true" && r[7] == "true"), "{csv}");
    // --workers caps the sweep.
    let r = acd(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(r.code, EXIT_OK);
    assert_eq!(r.out.lines().count(), 3);
}

#[test]
fn bench_needs_parallel_engine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &format!("{RIDGE}[solver]\nengine = \"ccd\"\n"));
    let r = acd(&["bench", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(r.code, EXIT_USAGE);
}

#[test]
fn argument_errors() {
    assert_eq!(acd(&[]).code, EXIT_USAGE);
    assert_eq!(acd(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(acd(&["solve"]).code, EXIT_USAGE);
    assert_eq!(acd(&["solve", "--config", "x", "--seed", "minus"]).code, EXIT_USAGE);
    let help = acd(&["--help"]);
    assert_eq!(help.code, EXIT_OK);
    for sub in ["solve", "market", "verify", "bench"] {
        assert!(help.out.contains(sub));
    }
}
