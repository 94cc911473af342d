//! Parameter sweeps and energy curves.
//!
//! A sweep solves the same base scenario at each value of one parameter and
//! appends a row to `sweep.csv` as soon as that point (and every point
//! before it) is done, so an interrupted run keeps its finished rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::Serialize;
use serde_json::json;

use crate::energy::{power_curve, PowerCurvePoint};
use crate::error::{Error, Result};
use crate::export::{export_report, fmt9, write_json, Manifest, FLOAT_FORMAT, TOOL_NAME, TOOL_VERSION};
use crate::planners::{solve, Plan, ProblemKind, SolveOptions, SolveReport};
use crate::sca::BcdConfig;
use crate::scenario::{load_scenario_file, EnergyModelParams, Scenario, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    PeriodS,
    EnergyBudgetJ,
    PowerControl,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::PeriodS => "period_s",
            Self::EnergyBudgetJ => "energy_budget_j",
            Self::PowerControl => "power_control",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "period_s" => Ok(Self::PeriodS),
            "energy_budget_j" => Ok(Self::EnergyBudgetJ),
            "power_control" => Ok(Self::PowerControl),
            other => Err(Error::Schema(vec![format!(
                "unknown sweep parameter '{other}' (expected period_s, energy_budget_j or power_control)"
            )])),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delay" => Ok(Self::Delay),
            "iuic" => Ok(Self::Iuic),
            "energy" => Ok(Self::Energy),
            other => Err(Error::Schema(vec![format!(
                "unknown problem '{other}' (expected delay, iuic or energy)"
            )])),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub scenario_path: PathBuf,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub problem: ProblemKind,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub config: BcdConfig,
    /// Start each point from the previous point's plan when it is feasible.
    /// Warm-started sweeps run their points in order, one at a time.
    pub warm_start: bool,
    /// Worker threads for cold sweeps.
    pub workers: usize,
    /// Write the full plan export of every point under `points/`.
    pub export_points: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            config: BcdConfig::default(),
            warm_start: true,
            workers: 1,
            export_points: true,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.values.is_empty() {
            errors.push("sweep value list is empty".to_string());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            errors.push("sweep values must be finite".to_string());
        }
        if self.values.windows(2).any(|w| w[1] <= w[0]) {
            errors.push("sweep values must be strictly increasing".to_string());
        }
        if self.parameter == SweepParameter::PowerControl && self.values.iter().any(|&v| v != 0.0 && v != 1.0) {
            errors.push("power_control values must be 0 or 1".to_string());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Schema(errors))
        }
    }
}

/// The scenario and power-control flag for one sweep point.
pub fn apply_value(base: &Scenario, parameter: SweepParameter, value: f64) -> (Scenario, bool) {
    let mut s = base.clone();
    match parameter {
        SweepParameter::PeriodS => s.grid = TimeGrid::new(value, base.grid.slot_count),
        SweepParameter::EnergyBudgetJ => s.uavs.iter_mut().for_each(|u| u.energy_budget = Some(value)),
        SweepParameter::PowerControl => return (s, value != 0.0),
    }
    (s, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Cold,
    Warm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub value: f64,
    /// `None` on success, otherwise the error message.
    pub error: Option<String>,
    pub start: StartKind,
    pub common_throughput: Option<f64>,
    pub per_user_throughput: Vec<f64>,
    /// Total propulsion energy, when the scenario has an energy model.
    pub energy_j: Option<f64>,
    pub iterations: Option<usize>,
    /// Not written to `sweep.csv`; see `sweep_timing.csv`.
    pub wall_time_s: Option<f64>,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn from_report(s: &Scenario, value: f64, report: &SolveReport) -> Result<Self> {
        let energies = report.plan.energies(s)?;
        let energy_j = if energies.iter().all(Option::is_some) && !energies.is_empty() {
            Some(energies.iter().flatten().sum())
        } else {
            None
        };
        Ok(Self {
            value,
            error: None,
            start: if report.warm_started { StartKind::Warm } else { StartKind::Cold },
            common_throughput: Some(report.plan.common_throughput),
            per_user_throughput: report.plan.per_user_throughput.clone(),
            energy_j,
            iterations: Some(report.trace.iterations),
            wall_time_s: Some(report.wall_time_s),
        })
    }

    fn failed(value: f64, start: StartKind, error: &Error) -> Self {
        Self {
            value,
            error: Some(error.to_string()),
            start,
            common_throughput: None,
            per_user_throughput: Vec::new(),
            energy_j: None,
            iterations: None,
            wall_time_s: None,
        }
    }
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "value",
    "status",
    "start",
    "r_com_bpshz",
    "energy_j",
    "iterations",
    "per_user_bpshz",
    "error",
];

fn row_record(r: &ResultRow) -> Vec<String> {
    vec![
        fmt9(r.value),
        if r.ok() { "ok" } else { "failed" }.into(),
        match r.start {
            StartKind::Cold => "cold",
            StartKind::Warm => "warm",
        }
        .into(),
        r.common_throughput.map(fmt9).unwrap_or_default(),
        r.energy_j.map(fmt9).unwrap_or_default(),
        r.iterations.map(|i| i.to_string()).unwrap_or_default(),
        r.per_user_throughput.iter().map(|&v| fmt9(v)).collect::<Vec<_>>().join(";"),
        r.error.clone().unwrap_or_default(),
    ]
}

fn parse_field<T: FromStr>(field: &str, what: &str, line: usize) -> Result<Option<T>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::Parse(format!("sweep row {line}: bad {what} '{field}'")))
}

/// Read back a `sweep.csv`. Wall times are not part of that file.
pub fn load_sweep_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(SWEEP_COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let start = match &rec[2] {
            "cold" => StartKind::Cold,
            "warm" => StartKind::Warm,
            other => return Err(Error::Parse(format!("sweep row {line}: bad start '{other}'"))),
        };
        let per_user = if rec[6].is_empty() {
            Vec::new()
        } else {
            rec[6]
                .split(';')
                .map(|v| parse_field::<f64>(v, "throughput", line).map(|x| x.unwrap_or(f64::NAN)))
                .collect::<Result<_>>()?
        };
        rows.push(ResultRow {
            value: parse_field(&rec[0], "value", line)?.unwrap_or(f64::NAN),
            error: match &rec[1] {
                "ok" => None,
                _ => Some(rec[7].to_string()),
            },
            start,
            common_throughput: parse_field(&rec[3], "r_com", line)?,
            per_user_throughput: per_user,
            energy_j: parse_field(&rec[4], "energy", line)?,
            iterations: parse_field(&rec[5], "iterations", line)?,
            wall_time_s: None,
        });
    }
    Ok(rows)
}

struct PointOutcome {
    row: ResultRow,
    plan: Option<Plan>,
}

fn solve_point(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &SweepOptions,
    index: usize,
    warm: Option<&Plan>,
) -> PointOutcome {
    let value = spec.values[index];
    let (s, power_control) = apply_value(base, spec.parameter, value);
    let solve_opts = SolveOptions {
        config: opts.config,
        power_control,
        warm_start: warm.cloned(),
    };
    let start = if warm.is_some() { StartKind::Warm } else { StartKind::Cold };
    let dir = point_dir(&spec.out_dir, index);
    let result = solve(&s, spec.problem, &solve_opts).and_then(|report| {
        if opts.export_points {
            let source = index.checked_sub(1).map(|p| format!("points/{}", point_name(p)));
            export_report(&dir, &s, &report, &Manifest::for_report(&s, &report, source))?;
        }
        Ok((ResultRow::from_report(&s, value, &report)?, report.plan))
    });
    match result {
        Ok((row, plan)) => PointOutcome { row, plan: Some(plan) },
        Err(e) => {
            if opts.export_points {
                // best effort; the row already carries the error
                let _ = crate::export::write_error(&dir, spec.problem.name(), &e.to_string());
            }
            PointOutcome {
                row: ResultRow::failed(value, start, &e),
                plan: None,
            }
        }
    }
}

fn point_name(index: usize) -> String {
    format!("point_{index:03}")
}

fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join("points").join(point_name(index))
}

/// Run every point of the sweep. Errors are returned only for an invalid
/// spec or unreadable output directory; failed points are recorded in their
/// rows and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let base = load_scenario_file(&spec.scenario_path)?;
    fs::create_dir_all(&spec.out_dir)?;
    let manifest = json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": "sweep",
        "scenario_hash": base.content_hash(),
        "problem": spec.problem.name(),
        "parameter": spec.parameter.name(),
        "values": spec.values,
        "tolerances": opts.config,
        "warm_start": opts.warm_start,
        "float_format": FLOAT_FORMAT,
    });
    write_json(&spec.out_dir.join("manifest.json"), &manifest)?;
    fs::write(spec.out_dir.join("scenario.toml"), crate::scenario::render_scenario(&base))?;

    let mut out = csv::Writer::from_path(spec.out_dir.join("sweep.csv"))?;
    out.write_record(SWEEP_COLUMNS)?;
    out.flush()?;
    let mut timing = csv::Writer::from_path(spec.out_dir.join("sweep_timing.csv"))?;
    timing.write_record(["value", "wall_time_s"])?;
    let mut rows = Vec::with_capacity(spec.values.len());
    let mut emit = |row: ResultRow, rows: &mut Vec<ResultRow>| -> Result<()> {
        out.write_record(row_record(&row))?;
        out.flush()?;
        timing.write_record([fmt9(row.value), row.wall_time_s.map(fmt9).unwrap_or_default()])?;
        timing.flush()?;
        rows.push(row);
        Ok(())
    };

    if opts.warm_start || opts.workers <= 1 {
        let mut previous: Option<Plan> = None;
        for i in 0..spec.values.len() {
            let warm = if opts.warm_start { previous.as_ref() } else { None };
            let outcome = solve_point(&base, spec, opts, i, warm);
            if outcome.plan.is_some() {
                previous = outcome.plan;
            }
            emit(outcome.row, &mut rows)?;
        }
        return Ok(rows);
    }

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut result = Ok(());
    std::thread::scope(|scope| {
        for _ in 0..opts.workers.min(spec.values.len()) {
            let tx = tx.clone();
            let (next, base) = (&next, &base);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= spec.values.len() {
                    break;
                }
                let outcome = solve_point(base, spec, opts, i, None);
                if tx.send((i, outcome.row)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // write rows in sweep order as soon as the prefix is complete
        let mut pending = BTreeMap::new();
        for (i, row) in rx {
            pending.insert(i, row);
            while let Some(row) = pending.remove(&rows.len()) {
                if let Err(e) = emit(row, &mut rows) {
                    result = Err(e);
                }
            }
        }
    });
    result.map(|_| rows)
}

/// Power curve of `model` written as `speed_mps,power_w`.
pub fn emit_energy_curve(
    model: &EnergyModelParams,
    start: f64,
    stop: f64,
    step: f64,
    out: &mut dyn std::io::Write,
) -> Result<Vec<PowerCurvePoint>> {
    let points = power_curve(model, start, stop, step)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["speed_mps", "power_w"])?;
    for p in &points {
        w.write_record([fmt9(p.speed), fmt9(p.power)])?;
    }
    w.flush()?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        let mut spec = SweepSpec {
            scenario_path: "x.toml".into(),
            parameter: SweepParameter::PeriodS,
            values: vec![],
            problem: ProblemKind::Delay,
            out_dir: "out".into(),
        };
        assert!(spec.validate().is_err());
        spec.values = vec![40.0, 40.0];
        assert!(spec.validate().is_err());
        spec.values = vec![40.0, 60.0];
        assert!(spec.validate().is_ok());
        spec.parameter = SweepParameter::PowerControl;
        assert!(spec.validate().is_err());
        spec.values = vec![0.0, 1.0];
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn energy_curve_rows() {
        let model = EnergyModelParams::FixedWing { c1: 9.26e-4, c2: 2250.0 };
        let mut buf = Vec::new();
        emit_energy_curve(&model, 5.0, 50.0, 5.0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("speed_mps,power_w\n"));
        assert!(text.contains("\n30,100.002\n"));
        assert_eq!(text.lines().count(), 11);
        assert!(matches!(
            emit_energy_curve(&model, 0.0, 50.0, 5.0, &mut Vec::new()),
            Err(Error::Domain(_))
        ));
    }
}
