use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uav-tradeoff")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[channel]
beta0_db = -50.0
noise_power_dbm = -110.0

[grid]
period_s = 40.0
slot_count = 20

[[users]]
id = "gu1"
x_m = -1000.0
y_m = 0.0

[[users]]
id = "gu2"
x_m = 1000.0
y_m = 0.0

[[uavs]]
id = "uav1"
altitude_m = 100.0
v_max_mps = 50.0
tx_power_w = 0.1
"#;

fn write_small(dir: &Path) -> String {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p.to_string_lossy().into_owned()
}

fn shipped(name: &str) -> String {
    format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["two_user_delay.toml", "fixed_wing_energy.toml", "two_uav_six_user.toml"] {
        let o = run(&["validate", "--scenario", &shipped(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn missing_file_is_an_input_error() {
    let o = run(&["validate", "--scenario", "/nonexistent/nowhere.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/nowhere.toml"));
}

#[test]
fn energy_problem_needs_a_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_small(tmp.path());
    let out = tmp.path().join("out");
    let o = run(&["solve", "--scenario", &path, "--out", out.to_str().unwrap(), "--problem", "energy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("energy_budget_j"), "{}", stderr(&o));
}

#[test]
fn energy_curve_to_stdout_and_file() {
    let o = run(&["energy-curve", "--model", "fixed-wing", "--from", "10", "--to", "40", "--step", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "speed_mps,power_w");
    assert_eq!(lines.len(), 5);

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("curve");
    let o = run(&["energy-curve", "--model", "fixed-wing", "--out", out.to_str().unwrap(), "--from", "10", "--to", "40", "--step", "10"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("energy_curve.csv")).unwrap(), text);
    assert!(out.join("energy_curve_meta.json").exists());
}

#[test]
fn fixed_wing_curve_cannot_start_at_zero() {
    let o = run(&["energy-curve", "--model", "fixed-wing", "--from", "0", "--to", "10", "--step", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_writes_reproducible_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_small(tmp.path());
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = run(&["solve", "--scenario", &path, "--out", out.to_str().unwrap(), "--problem", "delay"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        for f in [
            "trajectory_uav1.csv",
            "schedule.csv",
            "powers.csv",
            "rates.csv",
            "report.json",
            "manifest.json",
            "scenario.toml",
            "timing.json",
        ] {
            assert!(out.join(f).exists(), "missing {f}");
        }
        outputs.push(out);
    }
    for f in ["trajectory_uav1.csv", "schedule.csv", "report.json", "manifest.json"] {
        assert_eq!(fs::read(outputs[0].join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(outputs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "ok");
    assert!(report["plan"]["common_throughput_bpshz"].as_f64().unwrap() > 3.3);
}

#[test]
fn oracle_schedule_runs_on_a_tiny_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let small = SMALL.replace("slot_count = 20", "slot_count = 6");
    let path = tmp.path().join("tiny.toml");
    fs::write(&path, small).unwrap();
    let out = tmp.path().join("oracle");
    let o = run(&[
        "oracle",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--kind",
        "schedule",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("oracle_meta.json").exists());
}
