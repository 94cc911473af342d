//! The three planning problems and their reference bounds.

mod bounds;
mod plan;
mod problems;
mod schedule;
mod steps;

pub use bounds::{static_baseline, travel_free_upper_bound, water_level};
pub use plan::{cyclic_run_count, longest_cyclic_run, DelayMetrics, Plan, ENERGY_TOL, SERVICE_THRESHOLD};
pub use problems::{
    initial_trajectories, optimal_schedule, plan_energy_constrained, plan_multi_uav_iuic, plan_single_uav_delay, schedule_lp, solve,
    ProblemKind, SolveOptions, SolveReport,
};
pub use schedule::schedule_lp_from_rates;
