use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use uav_tradeoff::energy::characteristic_speeds;
use uav_tradeoff::experiments::{emit_energy_curve, run_sweep, SweepOptions, SweepParameter, SweepSpec};
use uav_tradeoff::export::{export_report, plan_summary, write_error, write_json, write_plan_tables, Manifest};
use uav_tradeoff::oracle::{brute_force_schedule, grid_search_trajectory, GridSpec};
use uav_tradeoff::planners::{initial_trajectories, solve, Plan, ProblemKind, SolveOptions};
use uav_tradeoff::sca::BcdConfig;
use uav_tradeoff::scenario::{load_scenario_file, EnergyModelParams, RotaryWingParams, Scenario};
use uav_tradeoff::channel::PowerProfile;
use uav_tradeoff::Error;

/// Trajectory, scheduling and power planning for UAV base stations.
#[derive(Parser)]
#[command(name = "uav-tradeoff", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for cold sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Stop when an outer iteration improves R_com by less than this.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol_monotone: f64,
    /// Outer iteration cap.
    #[arg(long, global = true, default_value_t = 100)]
    max_iters: usize,
    /// Reserved. Every run is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one scenario and export the result.
    Solve {
        #[arg(long, value_enum)]
        problem: Problem,
        /// Power control for the multi-UAV problem.
        #[arg(long, value_enum, default_value_t = Switch::On)]
        power_control: Switch,
    },
    /// Solve the scenario at every value of one parameter.
    Sweep {
        #[arg(long, value_enum)]
        problem: Problem,
        /// period_s, energy_budget_j or power_control.
        #[arg(long)]
        param: String,
        /// Comma separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Start every point from the circular initializer.
        #[arg(long)]
        cold: bool,
        /// Only write sweep.csv and the manifest.
        #[arg(long)]
        no_point_exports: bool,
    },
    /// Propulsion power versus speed as CSV.
    EnergyCurve {
        /// Model to plot; defaults to the scenario's model.
        #[arg(long, value_enum)]
        model: Option<Model>,
        #[arg(long, default_value_t = 5.0)]
        from: f64,
        #[arg(long, default_value_t = 50.0)]
        to: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Exhaustive search on a tiny instance.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        /// Grid spacing for the trajectory search, meters.
        #[arg(long, default_value_t = 250.0)]
        step: f64,
        /// Keep waypoints on the segment between the first two users.
        #[arg(long)]
        segment: bool,
    },
    /// Check a scenario file and print its content hash.
    Validate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Delay,
    Iuic,
    Energy,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Delay => ProblemKind::Delay,
            Problem::Iuic => ProblemKind::Iuic,
            Problem::Energy => ProblemKind::Energy,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    FixedWing,
    RotaryWing,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Schedule,
    Trajectory,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Read { .. }
            | Error::Parse(_)
            | Error::Schema(_)
            | Error::Unsupported(_)
            | Error::InfeasibleBudget { .. }
            | Error::InfeasibleSpeed(_)
            | Error::InstanceTooLarge { .. }
            | Error::Domain(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn scenario(g: &Global) -> Result<Scenario, Failure> {
    let path = g.scenario.as_ref().ok_or_else(|| input_error("--scenario is required"))?;
    Ok(load_scenario_file(path)?)
}

fn out_dir(g: &Global) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn config(g: &Global) -> Result<BcdConfig, Failure> {
    if !(g.tol_monotone >= 0.0) || g.max_iters == 0 {
        return Err(input_error("--tol-monotone must be >= 0 and --max-iters >= 1"));
    }
    Ok(BcdConfig {
        max_outer_iters: g.max_iters,
        tol_monotone: g.tol_monotone,
        ..BcdConfig::default()
    })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Solve { problem, power_control } => {
            let s = scenario(g)?;
            let config = config(g)?;
            let kind = ProblemKind::from(*problem);
            let out = out_dir(g);
            let opts = SolveOptions {
                config,
                power_control: *power_control == Switch::On,
                warm_start: None,
            };
            match solve(&s, kind, &opts) {
                Ok(report) => {
                    export_report(&out, &s, &report, &Manifest::for_report(&s, &report, None))?;
                    println!(
                        "{}: R_com = {:.6} bps/Hz after {} iterations ({:?})",
                        kind.name(),
                        report.plan.common_throughput,
                        report.trace.iterations,
                        report.trace.termination
                    );
                    Ok(0)
                }
                Err(e) => {
                    let f = Failure::from(e);
                    if f.code == 3 {
                        let _ = write_error(&out, kind.name(), &f.message);
                    }
                    Err(f)
                }
            }
        }
        Command::Sweep {
            problem,
            param,
            values,
            cold,
            no_point_exports,
        } => {
            let path = g.scenario.clone().ok_or_else(|| input_error("--scenario is required"))?;
            let spec = SweepSpec {
                scenario_path: path,
                parameter: param.parse::<SweepParameter>()?,
                values: values.clone(),
                problem: (*problem).into(),
                out_dir: out_dir(g),
            };
            let opts = SweepOptions {
                config: config(g)?,
                warm_start: !cold,
                workers: g.workers.max(1),
                export_points: !no_point_exports,
            };
            let rows = run_sweep(&spec, &opts)?;
            let failed = rows.iter().filter(|r| !r.ok()).count();
            for r in &rows {
                match (&r.error, r.common_throughput) {
                    (None, Some(v)) => println!("{} = {}: R_com = {v:.6}", spec.parameter.name(), r.value),
                    (Some(e), _) => println!("{} = {}: failed: {e}", spec.parameter.name(), r.value),
                    _ => {}
                }
            }
            if failed > 0 {
                eprintln!("{failed} of {} sweep points failed", rows.len());
                Ok(4)
            } else {
                Ok(0)
            }
        }
        Command::EnergyCurve { model, from, to, step } => {
            let model = match (model, &g.scenario) {
                (Some(Model::FixedWing), _) => EnergyModelParams::FixedWing { c1: 9.26e-4, c2: 2250.0 },
                (Some(Model::RotaryWing), _) => EnergyModelParams::RotaryWing(RotaryWingParams::default()),
                (None, Some(_)) => scenario(g)?.energy,
                (None, None) => return Err(input_error("give --model or a --scenario with an energy model")),
            };
            if model == EnergyModelParams::None {
                return Err(input_error("the scenario has no energy model"));
            }
            match &g.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(Error::from)?;
                    let mut f = fs::File::create(dir.join("energy_curve.csv")).map_err(Error::from)?;
                    emit_energy_curve(&model, *from, *to, *step, &mut f)?;
                    let speeds = characteristic_speeds(&model)?;
                    write_json(
                        &dir.join("energy_curve_meta.json"),
                        &json!({
                            "model": model.kind_name(),
                            "min_power_speed_mps": speeds.min_power_speed,
                            "min_energy_per_meter_speed_mps": speeds.min_energy_per_meter_speed,
                        }),
                    )?;
                }
                None => {
                    emit_energy_curve(&model, *from, *to, *step, &mut std::io::stdout().lock())?;
                }
            }
            Ok(0)
        }
        Command::Oracle { kind, step, segment } => {
            let s = scenario(g)?;
            let out = out_dir(g);
            oracle(&s, *kind, *step, *segment, &out)?;
            Ok(0)
        }
        Command::Validate => {
            let s = scenario(g)?;
            println!(
                "ok: {} users, {} UAVs, T = {} s, N = {}, sha256 {}",
                s.users.len(),
                s.uavs.len(),
                s.grid.period,
                s.grid.slot_count,
                s.content_hash()
            );
            Ok(0)
        }
    }
}

fn oracle(s: &Scenario, kind: OracleKind, step: f64, segment: bool, out: &Path) -> Result<(), Failure> {
    let (plan, meta) = match kind {
        OracleKind::Schedule => {
            let traj = initial_trajectories(s, ProblemKind::Delay)?.remove(0);
            let (schedule, value) = brute_force_schedule(&traj, s)?;
            let candidates = (s.users.len() as f64).powi(s.grid.slot_count as i32);
            let plan = Plan::assemble(s, vec![traj], schedule, PowerProfile::full(s))?;
            let meta = json!({
                "kind": "schedule",
                "trajectory": "circular initializer",
                "candidates_evaluated": candidates,
                "epsilon_grid": 0.0,
                "common_throughput_bpshz": value,
            });
            (plan, meta)
        }
        OracleKind::Trajectory => {
            let grid = GridSpec::around_users(s, step, s.grid.slot_count, segment);
            let res = grid_search_trajectory(s, &grid)?;
            let meta = json!({
                "kind": "trajectory",
                "grid": grid,
                "candidates_evaluated": res.candidates_evaluated,
                "lp_solves": res.lp_solves,
                "epsilon_grid": res.epsilon_grid,
                "common_throughput_bpshz": res.plan.common_throughput,
            });
            (res.plan, meta)
        }
    };
    write_plan_tables(out, s, &plan)?;
    write_json(&out.join("report.json"), &json!({ "status": "ok", "plan": plan_summary(s, &plan)? }))?;
    write_json(&out.join("manifest.json"), &Manifest::new("oracle", s))?;
    write_json(&out.join("oracle_meta.json"), &meta)?;
    println!("oracle R_com = {:.6} bps/Hz", plan.common_throughput);
    Ok(())
}
