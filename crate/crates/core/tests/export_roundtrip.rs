use std::fs;
use std::path::{Path, PathBuf};

use uav_tradeoff::experiments::{load_sweep_csv, run_sweep, StartKind, SweepOptions, SweepParameter, SweepSpec};
use uav_tradeoff::export::{export_report, fmt9, Manifest};
use uav_tradeoff::planners::{solve, ProblemKind, SolveOptions};
use uav_tradeoff::scenario::{load_scenario_file, render_scenario, Scenario};

fn small_scenario(dir: &Path) -> (Scenario, PathBuf) {
    let s = Scenario::two_user_reference(60.0, 24);
    let path = dir.join("small.toml");
    fs::write(&path, render_scenario(&s)).unwrap();
    (s, path)
}

fn spec(scenario_path: &Path, values: &[f64], out: PathBuf) -> SweepSpec {
    SweepSpec {
        scenario_path: scenario_path.to_path_buf(),
        parameter: SweepParameter::PeriodS,
        values: values.to_vec(),
        problem: ProblemKind::Delay,
        out_dir: out,
    }
}

/// Every file under `dir` except timing records, as (relative path, bytes).
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            if name == "timing.json" || name == "sweep_timing.csv" {
                continue;
            }
            files.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    files.sort();
    files
}

#[test]
fn sweep_csv_round_trips_and_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = small_scenario(tmp.path());
    let values = [40.0, 60.0];
    let opts = SweepOptions::default();
    let a = run_sweep(&spec(&path, &values, tmp.path().join("a")), &opts).unwrap();
    let b = run_sweep(&spec(&path, &values, tmp.path().join("b")), &opts).unwrap();
    assert!(a.iter().all(|r| r.ok()));

    let loaded = load_sweep_csv(&tmp.path().join("a/sweep.csv")).unwrap();
    assert_eq!(loaded.len(), a.len());
    for (l, r) in loaded.iter().zip(&a) {
        assert_eq!(fmt9(l.value), fmt9(r.value));
        assert_eq!(l.start, r.start);
        assert_eq!(l.common_throughput.map(fmt9), r.common_throughput.map(fmt9));
        assert_eq!(l.iterations, r.iterations);
        assert_eq!(l.wall_time_s, None);
        let lp: Vec<String> = l.per_user_throughput.iter().map(|&v| fmt9(v)).collect();
        let rp: Vec<String> = r.per_user_throughput.iter().map(|&v| fmt9(v)).collect();
        assert_eq!(lp, rp);
    }
    assert_eq!(a.len(), b.len());
    assert_eq!(snapshot(&tmp.path().join("a")), snapshot(&tmp.path().join("b")));

    // the second point starts from the first one's plan and says so
    assert_eq!(a[0].start, StartKind::Cold);
    assert_eq!(a[1].start, StartKind::Warm);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("a/points/point_001/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["warm_start"]["warm_started"], serde_json::Value::Bool(true));
    assert!(manifest["warm_start"]["source"].is_string());
    assert!(manifest["scenario_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn parallel_cold_sweep_matches_sequential() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = small_scenario(tmp.path());
    let values = [40.0, 50.0, 60.0];
    let seq = SweepOptions {
        warm_start: false,
        export_points: false,
        ..SweepOptions::default()
    };
    let par = SweepOptions { workers: 2, ..seq.clone() };
    run_sweep(&spec(&path, &values, tmp.path().join("seq")), &seq).unwrap();
    run_sweep(&spec(&path, &values, tmp.path().join("par")), &par).unwrap();
    let read = |d: &str| fs::read(tmp.path().join(d).join("sweep.csv")).unwrap();
    assert_eq!(read("seq"), read("par"));
}

#[test]
fn single_point_sweep_equals_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let (s, path) = small_scenario(tmp.path());
    let rows = run_sweep(&spec(&path, &[60.0], tmp.path().join("sweep")), &SweepOptions::default()).unwrap();
    let report = solve(&s, ProblemKind::Delay, &SolveOptions::default()).unwrap();
    assert_eq!(rows[0].common_throughput.map(fmt9), Some(fmt9(report.plan.common_throughput)));

    let dir = tmp.path().join("solve");
    export_report(&dir, &s, &report, &Manifest::for_report(&s, &report, None)).unwrap();
    for f in ["schedule.csv", "powers.csv", "rates.csv", "trajectory_uav1.csv", "report.json"] {
        assert_eq!(
            fs::read(dir.join(f)).unwrap(),
            fs::read(tmp.path().join("sweep/points/point_000").join(f)).unwrap(),
            "{f} differs"
        );
    }
    // the exported scenario loads back to the solved one
    assert_eq!(load_scenario_file(&dir.join("scenario.toml")).unwrap(), s);
}

#[test]
fn bad_sweep_specs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, path) = small_scenario(tmp.path());
    for values in [vec![], vec![60.0, 40.0], vec![f64::NAN]] {
        assert!(run_sweep(&spec(&path, &values, tmp.path().join("x")), &SweepOptions::default()).is_err());
    }
}
