use serde::Serialize;

use crate::channel::{common_throughput, common_throughput_streaming, PowerProfile, Schedule};
use crate::energy::trajectory_energy;
use crate::error::{Error, Result};
use crate::kinematics::{kinematic_residuals, Trajectory};
use crate::scenario::{EnergyModelParams, Scenario};

/// A user counts as served in a slot when its total share exceeds this.
pub const SERVICE_THRESHOLD: f64 = 1e-6;

/// Allowed overshoot of the energy budget, joules.
pub const ENERGY_TOL: f64 = 1e-3;

/// Trajectories, schedule and powers together with the throughput they
/// achieve.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub trajectories: Vec<Trajectory>,
    pub schedule: Schedule,
    pub powers: PowerProfile,
    pub per_user_throughput: Vec<f64>,
    pub common_throughput: f64,
}

/// Delay figures of a plan, seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayMetrics {
    /// Every user is served at least once per period.
    pub worst_case_delay_s: f64,
    /// Longest run without service, per user (cyclic).
    pub max_service_gap_s: Vec<f64>,
}

impl Plan {
    pub fn assemble(
        s: &Scenario,
        trajectories: Vec<Trajectory>,
        schedule: Schedule,
        powers: PowerProfile,
    ) -> Result<Self> {
        let (per_user_throughput, common_throughput) =
            common_throughput_streaming(s, &trajectories, &schedule, &powers)?;
        Ok(Self {
            trajectories,
            schedule,
            powers,
            per_user_throughput,
            common_throughput,
        })
    }

    /// Propulsion energy per UAV, `None` without an energy model.
    pub fn energies(&self, s: &Scenario) -> Result<Vec<Option<f64>>> {
        if s.energy == EnergyModelParams::None {
            return Ok(vec![None; self.trajectories.len()]);
        }
        self.trajectories
            .iter()
            .map(|t| trajectory_energy(t, &s.grid, &s.energy).map(Some))
            .collect()
    }

    pub fn delay_metrics(&self, s: &Scenario) -> DelayMetrics {
        let (mm, kk, nn) = self.schedule.dims();
        let dt = s.grid.slot_len();
        let max_service_gap_s = (0..kk)
            .map(|k| {
                let served: Vec<bool> = (0..nn)
                    .map(|n| (0..mm).map(|m| self.schedule.get(m, k, n)).sum::<f64>() > SERVICE_THRESHOLD)
                    .collect();
                longest_cyclic_run(&served, false) as f64 * dt
            })
            .collect();
        DelayMetrics {
            worst_case_delay_s: s.grid.period,
            max_service_gap_s,
        }
    }

    /// Recheck every invariant against the scenario: component invariants,
    /// kinematic feasibility, the stored throughput, and the energy budget.
    pub fn verify(&self, s: &Scenario) -> Result<()> {
        let (per_user, r_com) = common_throughput(s, &self.trajectories, &self.schedule, &self.powers)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs());
        if !close(r_com, self.common_throughput)
            || per_user.iter().zip(&self.per_user_throughput).any(|(a, b)| !close(*a, *b))
        {
            return Err(Error::InvariantViolation(format!(
                "stored throughput {} does not match recomputed {r_com}",
                self.common_throughput
            )));
        }
        for (m, t) in self.trajectories.iter().enumerate() {
            let rep = kinematic_residuals(t, &s.uavs[m], &s.grid)?;
            if !rep.feasible {
                return Err(Error::InvariantViolation(format!("trajectory {m} infeasible: {rep:?}")));
            }
        }
        for (m, e) in self.energies(s)?.into_iter().enumerate() {
            if let (Some(e), Some(budget)) = (e, s.uavs[m].energy_budget) {
                if e > budget + ENERGY_TOL {
                    return Err(Error::InvariantViolation(format!(
                        "uav {m} energy {e} J exceeds budget {budget} J"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Longest cyclic run of `value` in `xs`.
pub fn longest_cyclic_run(xs: &[bool], value: bool) -> usize {
    let n = xs.len();
    if xs.iter().all(|&x| x == value) {
        return n;
    }
    let start = xs.iter().position(|&x| x != value).unwrap_or(0);
    let (mut best, mut run) = (0, 0);
    for i in 1..=n {
        if xs[(start + i) % n] == value {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Number of cyclic runs of `value` in `xs`.
pub fn cyclic_run_count(xs: &[bool], value: bool) -> usize {
    let n = xs.len();
    (0..n).filter(|&i| xs[i] == value && xs[(i + n - 1) % n] != value).count()
        + usize::from(n > 0 && xs.iter().all(|&x| x == value))
}
