use std::time::Instant;

use serde::Serialize;

use super::plan::{Plan, ENERGY_TOL};
use super::schedule::schedule_lp_from_rates;
use super::steps::{kinematic_trajectory_step, power_step, waypoint_trajectory_step};
use crate::channel::{common_throughput_streaming, gain_tensor, rate_tensor, PowerProfile, Schedule};
use crate::energy::{characteristic_speeds, trajectory_energy};
use crate::error::{Error, Result};
use crate::kinematics::{circular_initial_trajectory, cluster_users, kinematic_residuals, Fidelity, Trajectory};
use crate::sca::{bcd_solve, BcdConfig, BcdProblem, BcdTrace, BlockKind, BlockUpdate, SubproblemStatus, Termination};
use crate::scalar::centroid;
use crate::scenario::{EnergyModelParams, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Single UAV, throughput versus delay (period).
    Delay,
    /// Several UAVs with interference coordination.
    Iuic,
    /// Single fixed-wing UAV under an energy budget.
    Energy,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Delay => "delay",
            Self::Iuic => "iuic",
            Self::Energy => "energy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub config: BcdConfig,
    /// Power control block (multi-UAV only).
    pub power_control: bool,
    /// Start from this plan instead of the circular initializer. Ignored
    /// (with `warm_started = false` in the report) when infeasible for the
    /// scenario.
    pub warm_start: Option<Plan>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            config: BcdConfig::default(),
            power_control: true,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub problem: ProblemKind,
    pub plan: Plan,
    pub initial_common_throughput: f64,
    pub trace: BcdTrace,
    pub config: BcdConfig,
    pub power_control: bool,
    pub warm_started: bool,
    /// Seconds, not part of the deterministic output.
    pub wall_time_s: f64,
}

impl SolveReport {
    pub fn termination(&self) -> Termination {
        self.trace.termination
    }

    /// Largest drop between consecutive trace entries (≤ 0 when monotone).
    pub fn max_trace_decrease(&self) -> f64 {
        self.trace
            .objective_trace
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone)]
struct State {
    trajectories: Vec<Trajectory>,
    schedule: Schedule,
    powers: PowerProfile,
}

struct Bcd<'a> {
    s: &'a Scenario,
    kind: ProblemKind,
    power_control: bool,
}

impl BcdProblem for Bcd<'_> {
    type State = State;

    fn blocks(&self) -> Vec<BlockKind> {
        let mut b = vec![BlockKind::Schedule];
        if self.power_control {
            b.push(BlockKind::Power);
        }
        b.push(BlockKind::Trajectory);
        b
    }

    fn objective(&self, st: &State) -> Result<f64> {
        Ok(common_throughput_streaming(self.s, &st.trajectories, &st.schedule, &st.powers)?.1)
    }

    fn update(&self, block: BlockKind, st: &State, config: &BcdConfig) -> Result<BlockUpdate<State>> {
        let s = self.s;
        let tol = &config.subproblem;
        let mut next = st.clone();
        let status = match block {
            BlockKind::Schedule => {
                next.schedule = optimal_schedule(s, &st.trajectories, &st.powers)?.0;
                None
            }
            BlockKind::Power => {
                let out = power_step(s, &st.trajectories, &st.schedule, &st.powers, tol);
                next.powers = out.value;
                Some(out.status)
            }
            BlockKind::Trajectory => {
                let out = match self.kind {
                    ProblemKind::Energy => {
                        let o = kinematic_trajectory_step(s, &st.trajectories[0], &st.schedule, &st.powers, tol);
                        (vec![o.value], o.status)
                    }
                    _ => {
                        let o = waypoint_trajectory_step(s, &st.trajectories, &st.schedule, &st.powers, tol);
                        (o.value, o.status)
                    }
                };
                next.trajectories = out.0;
                Some(out.1)
            }
        };
        // numerical safety net: never hand back an infeasible plan
        if status != Some(SubproblemStatus::Infeasible) && !feasible(s, &next.trajectories)? {
            return Ok(BlockUpdate {
                state: st.clone(),
                status: Some(SubproblemStatus::MaxIter),
            });
        }
        Ok(BlockUpdate { state: next, status })
    }
}

fn feasible(s: &Scenario, trajectories: &[Trajectory]) -> Result<bool> {
    for (m, t) in trajectories.iter().enumerate() {
        if !kinematic_residuals(t, &s.uavs[m], &s.grid)?.feasible {
            return Ok(false);
        }
        if let (EnergyModelParams::FixedWing { .. }, Some(budget)) = (s.energy, s.uavs[m].energy_budget) {
            if t.fidelity == Fidelity::FullKinematic && trajectory_energy(t, &s.grid, &s.energy)? > budget + ENERGY_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact scheduling block for fixed trajectories and powers. Returns the
/// schedule and the LP's common throughput.
pub fn optimal_schedule(s: &Scenario, trajectories: &[Trajectory], powers: &PowerProfile) -> Result<(Schedule, f64)> {
    let rates = rate_tensor(&gain_tensor(s, trajectories), powers, s.channel.noise_power);
    schedule_lp_from_rates(&rates)
}

/// Schedule-only solve for a single UAV on a fixed trajectory at full power.
pub fn schedule_lp(trajectory: &Trajectory, s: &Scenario) -> Result<(Schedule, f64)> {
    optimal_schedule(s, std::slice::from_ref(trajectory), &PowerProfile::full(s))
}

/// Circle speed for a UAV whose users lie `r_geo` meters (mean) from the
/// circle center: one lap around that radius per period, capped at V_max.
fn initial_speed(s: &Scenario, m: usize, users: &[usize]) -> f64 {
    let pts: Vec<_> = users.iter().map(|&k| s.users[k].position).collect();
    if pts.is_empty() {
        return s.uavs[m].v_min;
    }
    let c = centroid(&pts);
    let r_geo = pts.iter().map(|p| p.dist(c)).sum::<f64>() / pts.len() as f64;
    (2.0 * std::f64::consts::PI * r_geo / s.grid.period).clamp(s.uavs[m].v_min, s.uavs[m].v_max)
}

/// Circular starting trajectories used by [`solve`] for a cold start.
pub fn initial_trajectories(s: &Scenario, kind: ProblemKind) -> Result<Vec<Trajectory>> {
    match kind {
        ProblemKind::Energy => {
            let u = &s.uavs[0];
            let speeds = characteristic_speeds(&s.energy)?;
            let v = speeds.min_power_speed.clamp(u.v_min, u.v_max);
            let t = circular_initial_trajectory(s, 0, v, Fidelity::FullKinematic)?;
            let required = trajectory_energy(&t, &s.grid, &s.energy)?;
            let budget = u.energy_budget.unwrap_or(f64::INFINITY);
            if budget + ENERGY_TOL < required {
                return Err(Error::InfeasibleBudget { budget, required });
            }
            Ok(vec![t])
        }
        _ => {
            let mm = s.uavs.len();
            let groups: Vec<Vec<usize>> = if mm == 1 {
                vec![(0..s.users.len()).collect()]
            } else {
                let c = cluster_users(&s.user_positions(), mm);
                (0..mm).map(|m| c.members(m)).collect()
            };
            (0..mm)
                .map(|m| {
                    let v = initial_speed(s, m, &groups[m]);
                    circular_initial_trajectory(s, m, v, Fidelity::WaypointOnly)
                })
                .collect()
        }
    }
}

fn check_problem(s: &Scenario, kind: ProblemKind) -> Result<()> {
    let mm = s.uavs.len();
    match kind {
        ProblemKind::Delay if mm != 1 => Err(Error::Unsupported(format!("delay problem needs one UAV, got {mm}"))),
        ProblemKind::Iuic if mm < 2 => Err(Error::Unsupported(format!("iuic problem needs at least two UAVs, got {mm}"))),
        ProblemKind::Energy => {
            if mm != 1 {
                return Err(Error::Unsupported(format!("energy problem needs one UAV, got {mm}")));
            }
            if s.uavs[0].energy_budget.is_none() {
                return Err(Error::Schema(vec!["uavs[0].energy_budget_j is required for the energy problem".into()]));
            }
            if !matches!(s.energy, EnergyModelParams::FixedWing { .. }) {
                return Err(Error::Unsupported(format!(
                    "energy problem needs the fixed-wing model, got {}",
                    s.energy.kind_name()
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn warm_start_usable(s: &Scenario, kind: ProblemKind, plan: &Plan) -> Result<bool> {
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    if plan.trajectories.len() != mm || plan.schedule.dims() != (mm, kk, nn) || plan.powers.dims() != (mm, nn) {
        return Ok(false);
    }
    let want = if kind == ProblemKind::Energy {
        Fidelity::FullKinematic
    } else {
        Fidelity::WaypointOnly
    };
    if plan.trajectories.iter().any(|t| t.fidelity != want || t.slot_count() != nn) {
        return Ok(false);
    }
    if !plan.powers.violations(s).is_empty() {
        return Ok(false);
    }
    feasible(s, &plan.trajectories)
}

/// Run BCD for `kind` on `s`.
pub fn solve(s: &Scenario, kind: ProblemKind, opts: &SolveOptions) -> Result<SolveReport> {
    let start = Instant::now();
    check_problem(s, kind)?;
    let power_control = opts.power_control && kind == ProblemKind::Iuic;
    let warm = match &opts.warm_start {
        Some(p) if warm_start_usable(s, kind, p)? => Some(p.clone()),
        _ => None,
    };
    let warm_started = warm.is_some();
    let initial = match warm {
        Some(p) => State {
            trajectories: p.trajectories,
            schedule: p.schedule,
            powers: p.powers,
        },
        None => {
            let trajectories = initial_trajectories(s, kind)?;
            let powers = PowerProfile::full(s);
            let schedule = optimal_schedule(s, &trajectories, &powers)?.0;
            State {
                trajectories,
                schedule,
                powers,
            }
        }
    };

    let problem = Bcd { s, kind, power_control };
    let initial_common_throughput = problem.objective(&initial)?;
    let (state, trace) = if power_control && !warm_started {
        // fixed full power first, then add the power block; the second stage
        // starts from the first stage's plan so it can only improve on it
        let fixed = Bcd {
            power_control: false,
            ..problem
        };
        let (mid, mut first) = bcd_solve(&fixed, initial, &opts.config)?;
        let problem = Bcd { s, kind, power_control };
        let (end, second) = bcd_solve(&problem, mid, &opts.config)?;
        first.objective_trace.extend_from_slice(&second.objective_trace[1..]);
        first.steps.extend(second.steps.into_iter().map(|mut st| {
            st.iteration += first.iterations;
            st
        }));
        first.iteration_seconds.extend(second.iteration_seconds);
        first.iterations += second.iterations;
        first.termination = second.termination;
        (end, first)
    } else {
        bcd_solve(&problem, initial, &opts.config)?
    };
    let plan = Plan::assemble(s, state.trajectories, state.schedule, state.powers)?;
    Ok(SolveReport {
        problem: kind,
        plan,
        initial_common_throughput,
        trace,
        config: opts.config,
        power_control,
        warm_started,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Single UAV: maximize the common throughput for the period `T` in `s`.
pub fn plan_single_uav_delay(s: &Scenario) -> Result<SolveReport> {
    solve(s, ProblemKind::Delay, &SolveOptions::default())
}

/// Several UAVs with interference; the power block runs when
/// `power_control` is set, otherwise every UAV transmits at its cap.
pub fn plan_multi_uav_iuic(s: &Scenario, power_control: bool) -> Result<SolveReport> {
    solve(
        s,
        ProblemKind::Iuic,
        &SolveOptions {
            power_control,
            ..SolveOptions::default()
        },
    )
}

/// Single fixed-wing UAV under its energy budget.
pub fn plan_energy_constrained(s: &Scenario) -> Result<SolveReport> {
    solve(s, ProblemKind::Energy, &SolveOptions::default())
}
