//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion, then fails if any of them failed.
//!
//! Run with `cargo test --release -p uav-tradeoff --test acceptance -- --nocapture`
//! to see the report.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uav_tradeoff::channel::{gain_tensor, rate_tensor, PowerProfile};
use uav_tradeoff::energy::{characteristic_speeds, fixed_wing_power, power_curve};
use uav_tradeoff::experiments::emit_energy_curve;
use uav_tradeoff::export::{export_report, Manifest};
use uav_tradeoff::kinematics::{speed_profile, Trajectory};
use uav_tradeoff::oracle::{brute_force_schedule, grid_search_trajectory, GridSpec};
use uav_tradeoff::planners::{
    cyclic_run_count, longest_cyclic_run, plan_energy_constrained, plan_multi_uav_iuic, plan_single_uav_delay,
    schedule_lp, static_baseline, travel_free_upper_bound, SolveReport, ENERGY_TOL, SERVICE_THRESHOLD,
};
use uav_tradeoff::sca::{norm_sq_tangent, rate_of_sq_distance, rate_surrogate};
use uav_tradeoff::scenario::{load_scenario_file, EnergyModelParams, RotaryWingParams, Scenario};
use uav_tradeoff::Vec2;

const C1: f64 = 9.26e-4;
const C2: f64 = 2250.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn speed_stats(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, sd, min, max)
}

fn energy_point_checks() -> Outcome {
    let start = Instant::now();
    let p30 = fixed_wing_power(30.0, C1, C2).unwrap();
    let v_star = characteristic_speeds(&EnergyModelParams::FixedWing { c1: C1, c2: C2 })
        .unwrap()
        .min_power_speed;
    let ok = (p30 - 100.002).abs() <= 1e-6 && (v_star - 30.0).abs() <= 0.01;
    check(
        ok && within(start.elapsed(), 1.0),
        format!("P(30) = {p30:.9} W, min-power speed = {v_star:.6} m/s"),
    )
}

fn closed_form_anchors() -> Outcome {
    let start = Instant::now();
    let s = Scenario::two_user_reference(100.0, 200);
    let lo = static_baseline(&s).unwrap();
    let hi = travel_free_upper_bound(&s).unwrap();
    let ok = (lo - 3.3220).abs() <= 1e-4 && (hi - 6.6439).abs() <= 1e-4;
    check(
        ok && within(start.elapsed(), 1.0),
        format!("static baseline = {lo:.6}, upper bound = {hi:.6} bps/Hz"),
    )
}

fn throughput_delay_curve() -> Outcome {
    let start = Instant::now();
    let periods = [40.0, 60.0, 80.0, 100.0, 120.0];
    let base = Scenario::two_user_reference(100.0, 200);
    let (lo, hi) = (static_baseline(&base).unwrap(), travel_free_upper_bound(&base).unwrap());
    let mut values = Vec::new();
    for &t in &periods {
        match plan_single_uav_delay(&Scenario::two_user_reference(t, 200)) {
            Ok(r) => values.push(r.plan.common_throughput),
            Err(e) => return check(false, format!("T = {t}: {e}")),
        }
    }
    let monotone = values.windows(2).all(|w| w[1] >= w[0] - 1e-6);
    let bracketed = values.iter().all(|&v| v >= lo - 1e-6 && v <= hi + 1e-6);
    let spread = values[4] - values[0];
    check(
        monotone && bracketed && spread >= 0.5 && within(start.elapsed(), 600.0),
        format!("R_com = {values:.4?}, R(120) - R(40) = {spread:.4}"),
    )
}

fn scheduling_structure() -> Outcome {
    let s = Scenario::two_user_reference(100.0, 200);
    let report = match plan_single_uav_delay(&s) {
        Ok(r) => r,
        Err(e) => return check(false, e.to_string()),
    };
    let dir = tempfile::tempdir().unwrap();
    export_report(dir.path(), &s, &report, &Manifest::for_report(&s, &report, None)).unwrap();
    let mut served = vec![vec![false; 200]; 2];
    let mut rdr = csv::Reader::from_path(dir.path().join("schedule.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let n: usize = rec[0].parse().unwrap();
        let k = s.users.iter().position(|u| u.id == rec[2]).unwrap();
        let alpha: f64 = rec[3].parse().unwrap();
        served[k][n] |= alpha > SERVICE_THRESHOLD;
    }
    let dt = s.grid.slot_len();
    let blocks: Vec<usize> = served.iter().map(|x| cyclic_run_count(x, true)).collect();
    let gaps: Vec<f64> = served.iter().map(|x| longest_cyclic_run(x, false) as f64 * dt).collect();
    let ok = blocks.iter().all(|&b| b == 1) && gaps.iter().all(|&g| g >= 0.4 * s.grid.period);
    check(ok, format!("service blocks per user = {blocks:?}, max gaps = {gaps:?} s"))
}

fn natural_problem(s: &Scenario) -> &'static str {
    if s.uavs.len() > 1 {
        "iuic"
    } else if s.uavs[0].energy_budget.is_some() {
        "energy"
    } else {
        "delay"
    }
}

fn bcd_monotonicity(reports: &[(String, SolveReport)]) -> Outcome {
    let worst = reports
        .iter()
        .map(|(name, r)| (name.as_str(), r.max_trace_decrease()))
        .fold(("", f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let names: Vec<&str> = reports.iter().map(|(n, _)| n.as_str()).collect();
    check(
        !reports.is_empty() && worst.1 <= 1e-6,
        format!("{} scenarios {names:?}, largest trace drop {:.3e} ({})", reports.len(), worst.1, worst.0),
    )
}

fn surrogate_soundness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_under, mut worst_tangent) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..100_000 {
        // rate surrogate in squared distance
        let gamma0 = 10f64.powf(rng.gen_range(2.0..10.0));
        let h2 = rng.gen_range(50.0f64..300.0).powi(2);
        let x_r = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..4e6) };
        let x = rng.gen_range(0.0..4e6);
        let sur = rate_surrogate(gamma0, h2, x_r);
        let f = rate_of_sq_distance(gamma0, h2, x);
        worst_under = worst_under.max((sur.eval(x) - f) / f.abs().max(1.0));
        worst_tangent = worst_tangent.max((sur.eval(x_r) - rate_of_sq_distance(gamma0, h2, x_r)).abs());

        // tangent of the squared norm
        let r: Vec2<f64> = Vec2::new(rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0));
        let p: Vec2<f64> = Vec2::new(rng.gen_range(-2000.0..2000.0), rng.gen_range(-2000.0..2000.0));
        let t = norm_sq_tangent(r);
        worst_under = worst_under.max((t.eval(p) - p.norm_sq()) / p.norm_sq().max(1.0));
        worst_tangent = worst_tangent.max((t.eval(r) - r.norm_sq()).abs() / r.norm_sq().max(1.0));
    }
    check(
        worst_under <= 1e-9 && worst_tangent <= 1e-12 && within(start.elapsed(), 10.0),
        format!("max under-estimation excess {worst_under:.3e}, max tangency error {worst_tangent:.3e}"),
    )
}

fn tiny_scenario(rng: &mut ChaCha8Rng, slots: usize, period: f64) -> Scenario {
    let mut s = Scenario::two_user_reference(period, slots);
    let half = rng.gen_range(300.0..1200.0);
    s.users[0].position = Vec2::new(-half, rng.gen_range(-200.0..200.0));
    s.users[1].position = Vec2::new(half, rng.gen_range(-200.0..200.0));
    s
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut sched_cases, mut traj_cases) = (0, 0);
    let mut worst_lp = f64::INFINITY;
    let mut worst_traj = f64::INFINITY;
    for _ in 0..24 {
        let slots = rng.gen_range(1..=10);
        let period = rng.gen_range(5.0..200.0);
        let s = tiny_scenario(&mut rng, slots, period);
        let traj = Trajectory::from_waypoints(
            (0..slots)
                .map(|_| Vec2::new(rng.gen_range(-1500.0..1500.0), rng.gen_range(-500.0..500.0)))
                .collect(),
        );
        let (_, binary) = brute_force_schedule(&traj, &s).unwrap();
        let (_, lp) = schedule_lp(&traj, &s).unwrap();
        let rates = rate_tensor(&gain_tensor(&s, &[traj]), &PowerProfile::full(&s), s.channel.noise_power);
        let max_rate = rates.values().iter().copied().fold(0.0, f64::max);
        if lp - binary > max_rate / slots as f64 + 1e-9 {
            return check(false, format!("relaxation gap {} exceeds one slot", lp - binary));
        }
        worst_lp = worst_lp.min(lp - binary);
        sched_cases += 1;
    }
    for _ in 0..24 {
        let slots = rng.gen_range(3..=6);
        let period = slots as f64 * rng.gen_range(2.0..30.0);
        let s = tiny_scenario(&mut rng, slots, period);
        let len = s.users[0].position.dist(s.users[1].position);
        let grid = GridSpec::around_users(&s, len / 8.0, slots, true);
        let oracle = grid_search_trajectory(&s, &grid).unwrap();
        let p1 = plan_single_uav_delay(&s).unwrap();
        worst_traj = worst_traj.min(p1.plan.common_throughput - (oracle.plan.common_throughput - oracle.epsilon_grid));
        traj_cases += 1;
    }
    check(
        worst_lp >= -1e-9 && worst_traj >= 0.0 && within(start.elapsed(), 300.0),
        format!(
            "{sched_cases} schedule and {traj_cases} trajectory instances, min LP - binary = {worst_lp:.3e}, \
             min delay plan - (grid - eps) = {worst_traj:.4}"
        ),
    )
}

fn energy_constrained_behavior() -> Outcome {
    let start = Instant::now();
    let run = |budget: f64| plan_energy_constrained(&Scenario::two_user_fixed_wing(120.0, 200, budget));
    let (r13, r23, r125) = match (run(13000.0), run(23000.0), run(12500.0)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (a, b, c) => {
            let e = [a.err(), b.err(), c.err()].into_iter().flatten().next().unwrap();
            return check(false, e.to_string());
        }
    };
    let s13 = Scenario::two_user_fixed_wing(120.0, 200, 13000.0);
    let e13 = r13.plan.energies(&s13).unwrap()[0].unwrap();
    let (mean13, sd13, _, _) = speed_stats(&speed_profile(&r13.plan.trajectories[0], &s13.grid));
    let (_, _, min23, max23) = speed_stats(&speed_profile(&r23.plan.trajectories[0], &s13.grid));
    let (a, b, c) = (
        r23.plan.common_throughput,
        r13.plan.common_throughput,
        r125.plan.common_throughput,
    );
    let low_budget = e13 <= 13000.0 + ENERGY_TOL && (mean13 - 30.0).abs() <= 3.0 && sd13 <= 5.0;
    let high_budget = max23 >= 45.0 && min23 <= 10.0;
    let ordered = a >= b && b >= c;
    check(
        low_budget && high_budget && ordered && within(start.elapsed(), 900.0),
        format!(
            "13000 J: energy {e13:.3} J, speed mean {mean13:.2} sd {sd13:.2}; 23000 J: speed min {min23:.2} max {max23:.2}; \
             R_com(23000, 13000, 12500) = ({a:.4}, {b:.4}, {c:.4})"
        ),
    )
}

fn multi_uav(on: &SolveReport, s: &Scenario) -> Outcome {
    let start = Instant::now();
    let off = match plan_multi_uav_iuic(s, false) {
        Ok(r) => r,
        Err(e) => return check(false, e.to_string()),
    };
    let mut single = s.clone();
    single.uavs.truncate(1);
    let one = match plan_single_uav_delay(&single) {
        Ok(r) => r,
        Err(e) => return check(false, e.to_string()),
    };
    let (r_on, r_off, r_one) = (
        on.plan.common_throughput,
        off.plan.common_throughput,
        one.plan.common_throughput,
    );
    let total = start.elapsed() + Duration::from_secs_f64(on.wall_time_s);
    check(
        r_on >= r_off - 1e-6 && r_on >= r_one - 1e-6 && within(total, 1200.0),
        format!("R_com power control on {r_on:.6}, off {r_off:.6}, one UAV {r_one:.6}"),
    )
}

fn energy_curve_shapes() -> Outcome {
    let start = Instant::now();
    let fixed = EnergyModelParams::FixedWing { c1: C1, c2: C2 };
    let mut buf = Vec::new();
    let pts = emit_energy_curve(&fixed, 5.0, 50.0, 0.5, &mut buf).unwrap();
    let argmin = (0..pts.len()).min_by(|&i, &j| pts[i].power.total_cmp(&pts[j].power)).unwrap();
    let u_shape = pts[..=argmin].windows(2).all(|w| w[1].power < w[0].power)
        && pts[argmin..].windows(2).all(|w| w[1].power > w[0].power);
    let v_min = pts[argmin].speed;
    let rotary = power_curve(&EnergyModelParams::RotaryWing(RotaryWingParams::default()), 0.0, 60.0, 0.5).unwrap();
    let r_argmin = (0..rotary.len())
        .min_by(|&i, &j| rotary[i].power.total_cmp(&rotary[j].power))
        .unwrap();
    let rotary_ok = rotary[0].power.is_finite() && r_argmin > 0 && r_argmin < rotary.len() - 1;
    check(
        u_shape && (v_min - 30.0).abs() <= 0.5 && rotary_ok && within(start.elapsed(), 1.0),
        format!(
            "fixed-wing minimum at {v_min} m/s, rotary-wing P(0) = {:.3} W with minimum at {} m/s",
            rotary[0].power, rotary[r_argmin].speed
        ),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "energy model point checks", energy_point_checks()));
    results.push((2, "closed-form anchors", closed_form_anchors()));
    results.push((3, "throughput-delay curve", throughput_delay_curve()));
    results.push((4, "scheduling structure", scheduling_structure()));

    // every shipped scenario, solved with the problem it was written for
    let mut reports = Vec::new();
    let mut iuic = None;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let s = load_scenario_file(&path).unwrap();
        let report = match natural_problem(&s) {
            "iuic" => plan_multi_uav_iuic(&s, true),
            "energy" => plan_energy_constrained(&s),
            _ => plan_single_uav_delay(&s),
        };
        match report {
            Ok(r) => {
                if natural_problem(&s) == "iuic" {
                    iuic = Some((s.clone(), r.clone()));
                }
                reports.push((name, r));
            }
            Err(e) => panic!("{name}: {e}"),
        }
    }
    results.push((5, "BCD monotonicity", bcd_monotonicity(&reports)));
    results.push((6, "surrogate soundness", surrogate_soundness()));
    results.push((7, "oracle equivalence", oracle_equivalence()));
    results.push((8, "energy-constrained behavior", energy_constrained_behavior()));
    let (s2, on) = iuic.expect("a multi-UAV scenario ships with the repo");
    results.push((9, "multi-UAV interference coordination", multi_uav(&on, &s2)));
    results.push((10, "energy curve shapes", energy_curve_shapes()));

    println!();
    for (id, name, o) in &results {
        println!("criterion {id:2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
