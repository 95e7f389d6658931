use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use bgk_ness::config::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

fn bgk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bgk-ness")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let idx = lines.next().unwrap().split('\t').position(|c| c == name).unwrap();
    lines.map(|l| l.split('\t').nth(idx).unwrap().parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const EQUILIBRIUM: &str = "[walls]\nt1 = 1.0\nt2 = 1.0\nkappa = 1.0\n";

#[test]
fn default_config_is_the_builtin_default() {
    let out = bgk(&["default-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(RunConfig::from_toml_str(&text).unwrap(), RunConfig::default());
}

#[test]
fn equilibrium_solve_has_constant_tau() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let out_dir = dir.path().join("out");
    let out = bgk(&["solve", "--config", &cfg, "--force", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for t in column(&out_dir.join("profile.tsv"), "tau") {
        assert!((t - 1.0).abs() < 1e-6);
    }
    for j in column(&out_dir.join("profile.tsv"), "J") {
        assert!(j.abs() < 1e-6);
    }
    let fp = json(&out_dir.join("fixed_point.json"));
    assert_eq!(fp["report"]["iterations"], 1);
}

#[test]
fn equilibrium_without_force_is_a_condition_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), EQUILIBRIUM);
    let out = bgk(&["solve", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissibility condition"));
}

#[test]
fn reference_solve_converges_quickly_and_writes_headers() {
    let dir = TempDir::new().unwrap();
    let out = bgk(&["solve", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let fp = json(&dir.path().join("fixed_point.json"));
    assert!(fp["report"]["iterations"].as_u64().unwrap() <= 50);
    assert_eq!(fp["report"]["clamp_events"], 0);
    let diag = json(&dir.path().join("diagnostics.json"));
    assert_eq!(diag["report"]["passed"], true);
    let hash = fp["config_sha256"].as_str().unwrap().to_string();
    for name in ["profile.tsv", "config.toml"] {
        let first = fs::read_to_string(dir.path().join(name)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(first, format!("# bgk-ness {} config-sha256={hash}", env!("CARGO_PKG_VERSION")));
    }
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{EQUILIBRIUM}[grid]\nnodez = 3\n"));
    let out = bgk(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[walls]\nt1 = 100.0\nt2 = 400.0\nkappa = 1.0\n[fixed_point]\nmax_iter = 2\n");
    let out = bgk(&["solve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_sweep_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = bgk(&["sweep", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_records_failed_rows_and_fits_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "[walls]\nt1 = 100.0\nt2 = 400.0\nkappa = 1.0\n[sweep]\npoints = [\n  { t1 = 100.0, t2 = 400.0, kappa = 1.0 },\n  \
         { t1 = 1000.0, t2 = 4000.0, kappa = 1.0 },\n  { t1 = 1.0, t2 = 1.0, kappa = 1.0 },\n]\n",
    );
    let out = bgk(&["sweep", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&dir.path().join("sweep_summary.json"));
    assert_eq!(summary["report"]["succeeded"], 2);
    assert_eq!(summary["report"]["strictly_decreasing"], true);
    let dev = column(&dir.path().join("sweep.tsv"), "tau_half_deviation");
    assert!(dev[0] > dev[1] && dev[1] > 0.0 && dev[2].is_nan());
}

#[test]
fn coarse_grid_fails_validation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[walls]\nt1 = 100.0\nt2 = 400.0\nkappa = 1.0\n[grid]\nnodes = 8\n");
    let out = bgk(&["validate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let v = json(&dir.path().join("validation.json"));
    let diag: Vec<String> =
        v["report"]["diagnostic_failures"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect();
    assert!(diag.iter().any(|s| s.starts_with("zero_momentum")), "{diag:?}");
}

#[test]
fn validate_exit_code_follows_bracket_and_diagnostic_failures() {
    let dir = TempDir::new().unwrap();
    let out = bgk(&["validate", "--out", dir.path().to_str().unwrap()]);
    let v = json(&dir.path().join("validation.json"));
    let report = &v["report"];
    let failures = report["bracket_failures"].as_array().unwrap().len() + report["diagnostic_failures"].as_array().unwrap().len();
    assert_eq!(report["diagnostic_failures"].as_array().unwrap().len(), 0);
    assert_eq!(out.status.code(), Some(if failures == 0 { 0 } else { 4 }));
    assert_eq!(report["passed"], failures == 0);
}

#[test]
fn mc_with_frozen_profile_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let solved = dir.path().join("solved");
    assert!(bgk(&["solve", "--out", solved.to_str().unwrap()]).status.success());
    let cfg = write_config(
        dir.path(),
        "[walls]\nt1 = 100.0\nt2 = 400.0\nkappa = 1.0\n[monte_carlo]\nparticles = 256\nt_end = 50.0\nbins = 8\nbatches = 8\n",
    );
    let profile = solved.join("profile.tsv");
    let run = |name: &str, workers: &str| {
        let out_dir = dir.path().join(name);
        let out = bgk(&[
            "mc", "--config", &cfg, "--profile", profile.to_str().unwrap(), "--seed", "11", "--workers", workers,
            "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a", "1"), run("b", "2"));
    for name in ["moments.tsv", "comparison.tsv", "mc_summary.json", "config.toml"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    assert_eq!(column(&a.join("comparison.tsv"), "z_tau").len(), 8);
}

#[test]
fn equilibrium_mc_z_scores_are_small() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{EQUILIBRIUM}[fixed_point]\nforce = true\n[monte_carlo]\nparticles = 1000\nt_end = 200.0\nbins = 16\nbatches = 16\n"),
    );
    let out = bgk(&["mc", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for z in column(&dir.path().join("comparison.tsv"), "z_tau") {
        assert!(z.abs() <= 4.0, "z = {z}");
    }
}
