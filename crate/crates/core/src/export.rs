//! Plan artifacts: CSV tables and JSON reports.
//!
//! All numbers are written with 9 significant digits ([`fmt9`]) so that a
//! rerun with the same inputs reproduces every file byte for byte. Wall
//! times are the one nondeterministic output and go to `timing.json` only.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::channel::{gain_tensor, rate_tensor};
use crate::error::Result;
use crate::kinematics::Fidelity;
use crate::planners::{Plan, SolveReport};
use crate::sca::BcdConfig;
use crate::scenario::Scenario;

pub const TOOL_NAME: &str = "uav-tradeoff";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const FLOAT_FORMAT: &str = "9 significant digits";

/// Format with 9 significant digits, plain notation for moderate magnitudes
/// and exponent notation otherwise. Trailing zeros are dropped.
pub fn fmt9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 || x.is_subnormal() {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

/// `x` rounded to what [`fmt9`] prints.
pub fn round9(x: f64) -> f64 {
    if x.is_finite() {
        fmt9(x).parse().unwrap_or(x)
    } else {
        x
    }
}

/// Round every float in a JSON value to 9 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round9(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let v = round_json(serde_json::to_value(value)?);
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Trajectory, schedule, power and per-slot rate tables for `plan`.
pub fn write_plan_tables(dir: &Path, s: &Scenario, plan: &Plan) -> Result<()> {
    fs::create_dir_all(dir)?;
    let dt = s.grid.slot_len();
    for (m, t) in plan.trajectories.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("trajectory_{}.csv", file_safe(&s.uavs[m].id))))?;
        w.write_record(["slot", "t_s", "x_m", "y_m", "vx_mps", "vy_mps", "ax_mps2", "ay_mps2", "speed_mps"])?;
        let full = t.fidelity == Fidelity::FullKinematic;
        for (n, q) in t.positions.iter().enumerate() {
            // the closing row repeats the first position at t = T
            let v = if full { t.velocities.get(n % t.slot_count().max(1)).copied() } else { None };
            let a = if full { t.accelerations.get(n % t.slot_count().max(1)).copied() } else { None };
            let speed = if full {
                v.map(|v| v.norm())
            } else {
                t.positions.get(n + 1).map(|next| next.dist(*q) / dt)
            };
            w.write_record([
                n.to_string(),
                fmt9(n as f64 * dt),
                fmt9(q.x),
                fmt9(q.y),
                opt(v.map(|v| v.x)),
                opt(v.map(|v| v.y)),
                opt(a.map(|a| a.x)),
                opt(a.map(|a| a.y)),
                opt(speed),
            ])?;
        }
        w.flush()?;
    }

    let (mm, kk, nn) = plan.schedule.dims();
    let mut w = csv::Writer::from_path(dir.join("schedule.csv"))?;
    w.write_record(["slot", "uav", "user", "alpha"])?;
    for n in 0..nn {
        for m in 0..mm {
            for k in 0..kk {
                w.write_record([n.to_string(), s.uavs[m].id.clone(), s.users[k].id.clone(), fmt9(plan.schedule.get(m, k, n))])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("powers.csv"))?;
    w.write_record(["slot", "uav", "power_w"])?;
    for n in 0..nn {
        for m in 0..mm {
            w.write_record([n.to_string(), s.uavs[m].id.clone(), fmt9(plan.powers.get(m, n))])?;
        }
    }
    w.flush()?;

    // rate actually delivered to each user in each slot
    let rates = rate_tensor(&gain_tensor(s, &plan.trajectories), &plan.powers, s.channel.noise_power);
    let mut w = csv::Writer::from_path(dir.join("rates.csv"))?;
    w.write_record(["slot", "user", "rate_bpshz"])?;
    for n in 0..nn {
        for k in 0..kk {
            let r: f64 = (0..mm).map(|m| plan.schedule.get(m, k, n) * rates.get(m, k, n)).sum();
            w.write_record([n.to_string(), s.users[k].id.clone(), fmt9(r)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Summary of a plan without solver history.
pub fn plan_summary(s: &Scenario, plan: &Plan) -> Result<Value> {
    let delay = plan.delay_metrics(s);
    let energies = plan.energies(s)?;
    let users: Vec<Value> = s
        .users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            json!({
                "id": u.id,
                "throughput_bpshz": plan.per_user_throughput[k],
                "max_service_gap_s": delay.max_service_gap_s[k],
            })
        })
        .collect();
    let uavs: Vec<Value> = s
        .uavs
        .iter()
        .enumerate()
        .map(|(m, u)| {
            json!({
                "id": u.id,
                "energy_j": energies[m],
                "energy_budget_j": u.energy_budget,
                "path_length_m": plan.trajectories[m].path_length(),
            })
        })
        .collect();
    Ok(json!({
        "common_throughput_bpshz": plan.common_throughput,
        "worst_case_delay_s": delay.worst_case_delay_s,
        "users": users,
        "uavs": uavs,
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct WarmStartLineage {
    pub warm_started: bool,
    /// Where the starting plan came from, e.g. the previous sweep point.
    pub source: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario_hash: String,
    pub problem: Option<String>,
    pub power_control: Option<bool>,
    pub tolerances: Option<BcdConfig>,
    pub warm_start: WarmStartLineage,
    pub float_format: String,
}

impl Manifest {
    pub fn new(command: &str, s: &Scenario) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            scenario_hash: s.content_hash(),
            problem: None,
            power_control: None,
            tolerances: None,
            warm_start: WarmStartLineage {
                warm_started: false,
                source: None,
            },
            float_format: FLOAT_FORMAT.into(),
        }
    }

    pub fn for_report(s: &Scenario, report: &SolveReport, source: Option<String>) -> Self {
        Self {
            problem: Some(report.problem.name().into()),
            power_control: Some(report.power_control),
            tolerances: Some(report.config),
            warm_start: WarmStartLineage {
                warm_started: report.warm_started,
                source: if report.warm_started { source } else { None },
            },
            ..Self::new("solve", s)
        }
    }
}

/// Everything `solve` writes: the plan tables, `report.json`,
/// `manifest.json`, `scenario.toml` and `timing.json`.
pub fn export_report(dir: &Path, s: &Scenario, report: &SolveReport, manifest: &Manifest) -> Result<()> {
    write_plan_tables(dir, s, &report.plan)?;
    let body = json!({
        "problem": report.problem,
        "status": "ok",
        "plan": plan_summary(s, &report.plan)?,
        "initial_common_throughput_bpshz": report.initial_common_throughput,
        "iterations": report.trace.iterations,
        "termination": report.trace.termination,
        "objective_trace": report.trace.objective_trace,
        "steps": report.trace.steps,
    });
    write_json(&dir.join("report.json"), &body)?;
    write_json(&dir.join("manifest.json"), manifest)?;
    fs::write(dir.join("scenario.toml"), crate::scenario::render_scenario(s))?;
    write_timing(dir, report.wall_time_s, &report.trace.iteration_seconds)
}

/// Nondeterministic timing figures, kept apart from the reproducible files.
pub fn write_timing(dir: &Path, wall_time_s: f64, iteration_seconds: &[f64]) -> Result<()> {
    let v = json!({ "wall_time_s": wall_time_s, "iteration_seconds": iteration_seconds });
    let mut f = fs::File::create(dir.join("timing.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

/// Failure record written next to whatever partial output exists.
pub fn write_error(dir: &Path, problem: &str, message: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("report.json"),
        &json!({ "problem": problem, "status": "failed", "error": message }),
    )
}
