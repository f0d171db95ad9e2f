//! Command-line contract: flag validation, output routing, and the exit-code
//! mapping for every subcommand.

use std::path::PathBuf;
use std::process::{Command, Output};

use levelset_harmonics::oracle::catalog_entry;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lsharm"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn config_file(family: &str, file: &str) -> PathBuf {
    let path = scratch(file);
    let json = catalog_entry(family).unwrap().config.to_json();
    std::fs::write(&path, json).unwrap();
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

#[test]
fn catalog_lists_every_bundled_family() {
    let out = bin().arg("catalog").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    for name in [
        "parallel_lines",
        "concentric_circles",
        "hyperbolas",
        "spheres_chart",
        "parabolas_counterexample",
    ] {
        assert!(text.contains(name), "catalog listing misses {name}");
    }
}

#[test]
fn catalog_emit_round_trips_through_check() {
    let out = bin()
        .args(["catalog", "--emit", "concentric_circles"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let path = scratch("emitted_circles.json");
    std::fs::write(&path, &out.stdout).unwrap();
    let check = bin().arg("check").arg(&path).output().unwrap();
    assert_eq!(
        check.status.code(),
        Some(0),
        "emitted config must pass check: stderr {}",
        String::from_utf8_lossy(&check.stderr)
    );

    let missing = bin()
        .args(["catalog", "--emit", "no_such_family"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn grid_flag_is_validated() {
    let circles = config_file("concentric_circles", "grid_circles.json");
    for bad in ["9", "9,x", "0,9", "9,7,3"] {
        let out = bin()
            .arg("check")
            .arg(&circles)
            .args(["--grid", bad])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "--grid {bad} must be a usage error"
        );
    }
    let out = bin()
        .arg("check")
        .arg(&circles)
        .args(["--grid", "9,7"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["grid"], serde_json::json!([9, 7]));
}

#[test]
fn tolerance_flag_overrides_acceptance() {
    let parabolas = config_file("parabolas_counterexample", "tol_parabolas.json");
    let strict = bin().arg("check").arg(&parabolas).output().unwrap();
    assert_eq!(strict.status.code(), Some(3));
    let loose = bin()
        .arg("check")
        .arg(&parabolas)
        .args(["--tol", "10"])
        .output()
        .unwrap();
    assert_eq!(
        loose.status.code(),
        Some(0),
        "a tolerance above the residual must accept"
    );
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let circles = config_file("concentric_circles", "out_circles.json");
    let dest = scratch("report.json");
    let out = bin()
        .arg("check")
        .arg(&circles)
        .arg("--out")
        .arg(&dest)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty(), "--out must silence stdout");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(report["accepted"], serde_json::Value::Bool(true));
    assert_eq!(report["family"], "concentric_circles");
}

#[test]
fn flow_emits_a_csv_trace() {
    let circles = config_file("concentric_circles", "flow_circles.json");
    let out = bin()
        .arg("flow")
        .arg(&circles)
        .args(["--start", "0,0", "--length", "0.5", "--step", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,y1,y2,s1,t"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 51, "50 steps plus the start");
    let last: Vec<f64> = rows
        .last()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(last[0], 0.5, "the final row lands exactly on the target");
    // Flowing outward from the unit circle for 0.5 reaches radius 1.5.
    assert!((last[4] - 1.5f64.ln()).abs() < 1e-9);
}

#[test]
fn flow_truncation_is_a_numerical_failure() {
    let circles = config_file("concentric_circles", "trunc_circles.json");
    let out = bin()
        .arg("flow")
        .arg(&circles)
        .args(["--start", "0,0", "--length", "5", "--step", "0.01"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(4),
        "a flow that leaves the leaf range must exit 4"
    );
    let text = stdout_of(&out);
    assert!(
        text.lines().count() > 2,
        "the partial trace is still printed"
    );
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("leaf range"),
        "stderr explains the truncation"
    );
}

#[test]
fn verify_gradient_reports_small_errors() {
    let circles = config_file("concentric_circles", "vg_circles.json");
    let out = bin()
        .arg("verify-gradient")
        .arg(&circles)
        .args(["--start", "0,0", "--length", "0.5", "--flow-step", "0.005"])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let max_rel = report["max_rel_error"].as_f64().unwrap();
    assert!(max_rel < 1e-3, "max_rel_error = {max_rel}");
    assert!(report["rows"].as_array().unwrap().len() > 50);
}

#[test]
fn sample_emits_condition_rows() {
    let circles = config_file("concentric_circles", "sample_circles.json");
    let out = bin()
        .arg("sample")
        .arg(&circles)
        .args(["--grid", "9,5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s1,t,density,curvature,dphi_ds,lambda"));
    assert_eq!(lines.count(), 45, "9 x 5 grid rows");
}

#[test]
fn gauge_flag_is_validated() {
    let circles = config_file("concentric_circles", "gauge_circles.json");
    for bad in ["1", "1,2,3", "0,-1", "0,0"] {
        let out = bin()
            .arg("reconstruct")
            .arg(&circles)
            .args(["--gauge", bad])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "--gauge {bad} must be a usage error"
        );
    }
    let out = bin()
        .arg("reconstruct")
        .arg(&circles)
        .args(["--gauge", "0.5,2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).starts_with("t,u,du,lambda"));
}

#[test]
fn rejected_families_cannot_be_reconstructed() {
    let parabolas = config_file("parabolas_counterexample", "rejected_parabolas.json");
    let rec = bin().arg("reconstruct").arg(&parabolas).output().unwrap();
    assert_eq!(rec.status.code(), Some(3));
    let vg = bin()
        .arg("verify-gradient")
        .arg(&parabolas)
        .args(["--start", "0.5,0", "--length", "0.1"])
        .output()
        .unwrap();
    assert_eq!(vg.status.code(), Some(3));
}

#[test]
fn start_flag_is_validated() {
    let circles = config_file("concentric_circles", "start_circles.json");
    for bad in ["0", "0,0,0", "0,abc"] {
        let out = bin()
            .arg("flow")
            .arg(&circles)
            .args(["--start", bad, "--length", "0.1"])
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(2),
            "--start {bad} must be a usage error"
        );
    }
}

#[test]
fn usage_errors_exit_two() {
    let circles = config_file("concentric_circles", "usage_circles.json");
    // Missing required flag.
    let out = bin().arg("flow").arg(&circles).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Unknown subcommand.
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    // Missing config file.
    let out = bin().args(["check", "no/such/file.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
