//! Exit codes, messages and artifacts of the `mflq` binary.

use std::path::Path;
use std::process::{Command, Output};

use mflq::control::{example31_spec, ScalarProfile};
use mflq::model::problem_to_json;
use mflq::TimeGrid;

fn mflq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mflq"))
        .args(args)
        .env("MFLQ_OUT_DIR", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example_file(dir: &Path, horizon: f64, dt: f64, k: f64) -> String {
    let grid = TimeGrid::new(0.0, horizon, dt).unwrap();
    let spec = example31_spec(1.0, &ScalarProfile::Constant(0.0), 1.0, grid, k).unwrap();
    let path = dir.join("example31.json");
    std::fs::write(&path, problem_to_json(&spec)).unwrap();
    path.display().to_string()
}

#[test]
fn missing_problem_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mflq(&["analyze", "/nonexistent/problem.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn malformed_problem_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"dims\": {\"n\": 1,,}\n}\n").unwrap();
    let o = mflq(&["analyze", path.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("line 2") && msg.contains("column"), "{msg}");
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = mflq(&["analyze", "x.json", "--no-such-flag"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = example_file(dir.path(), 2.0, 0.1, 0.0);
    let o = mflq(&["simulate", &file, "--paths", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--paths"));
}

#[test]
fn analyze_reports_example_constants() {
    let dir = tempfile::tempdir().unwrap();
    let file = example_file(dir.path(), 2.0, 0.1, 0.0);
    let out = dir.path().join("out");
    let o = mflq(&["analyze", &file, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((report["kappa1"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((report["kappa2"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((report["kappa_t"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("kappa1   = 2.000000000000"), "{text}");
}

#[test]
fn backward_window_violation_exits_3_and_names_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let file = example_file(dir.path(), 2.0, 0.1, 0.0);
    let o = mflq(&["solve-bsde", &file, "--K", "1.5", "--paths", "10"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("backward solvability window K < kappa violated"), "{}", stderr(&o));
    // the manifest is written even on failure
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 3);
}

#[test]
fn untransformed_cross_terms_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let file = example_file(dir.path(), 2.0, 0.1, 0.0);
    let o = mflq(&["solve-hamiltonian", &file, "--transform", "off", "--paths", "4"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("cross weights"), "{}", stderr(&o));
}

#[test]
fn example31_reproduces_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = mflq(&["example31", "--rho", "1", "--x0", "1", "--probes", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("example31.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "s,x,x_exact,u,u_exact,y,z");
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
        assert!((v[1] - (-v[0] / 2.0).exp()).abs() <= 1e-3, "{line}");
        assert!((v[3] + (-v[0] / 2.0).exp()).abs() <= 2e-3, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 20_001);
}

#[test]
fn manifest_digests_match_written_files() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let file = example_file(dir.path(), 2.0, 0.05, 0.0);
    let out = dir.path().join("run");
    let o = mflq(&["simulate", &file, "--paths", "20", "--seed", "5", "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["command"], "simulate");
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["name"] == "mean.csv"));
    for f in files {
        let bytes = std::fs::read(out.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}
