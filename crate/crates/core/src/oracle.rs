//! Brute-force validators for tiny instances.
//!
//! These enumerate instead of optimizing, so they are only usable for a
//! handful of slots. Every routine estimates its candidate count up front
//! and refuses to run past [`CANDIDATE_CAP`].

use std::collections::HashMap;

use serde::Serialize;

use crate::channel::{gain_tensor, link_rate, los_gain, rate_tensor, PowerProfile, RateTensor, Schedule};
use crate::energy::propulsion_power;
use crate::error::{Error, Result};
use crate::kinematics::Trajectory;
use crate::planners::{schedule_lp_from_rates, Plan};
use crate::scalar::Vec2;
use crate::scenario::{EnergyModelParams, Scenario};

/// Upper limit on candidate evaluations for any oracle.
pub const CANDIDATE_CAP: f64 = 1e8;

/// Largest slot count accepted by [`grid_search_trajectory`].
pub const MAX_GRID_SLOTS: usize = 6;

fn check_cap(estimate: f64) -> Result<()> {
    if estimate > CANDIDATE_CAP {
        Err(Error::InstanceTooLarge {
            estimate,
            cap: CANDIDATE_CAP,
        })
    } else {
        Ok(())
    }
}

fn single_uav_rates(s: &Scenario, trajectory: &Trajectory) -> Result<RateTensor> {
    if s.uavs.len() != 1 {
        return Err(Error::Unsupported(format!("oracle needs one UAV, got {}", s.uavs.len())));
    }
    if trajectory.slot_count() != s.grid.slot_count {
        return Err(Error::LengthMismatch {
            what: "trajectory slots",
            got: trajectory.slot_count(),
            expected: s.grid.slot_count,
        });
    }
    let gains = gain_tensor(s, std::slice::from_ref(trajectory));
    Ok(rate_tensor(&gains, &PowerProfile::full(s), s.channel.noise_power))
}

/// Best schedule that serves exactly one user per slot, found by trying
/// all `K^N` assignments. Ties keep the first assignment in lexicographic
/// order (slot 0 most significant).
pub fn brute_force_schedule(trajectory: &Trajectory, s: &Scenario) -> Result<(Schedule, f64)> {
    let (kk, nn) = (s.users.len(), s.grid.slot_count);
    let fits = (kk == 2 && nn <= 12) || kk * nn <= 20;
    let estimate = (kk as f64).powi(nn as i32);
    if !fits {
        return Err(Error::InstanceTooLarge {
            estimate,
            cap: estimate.min(4096.0),
        });
    }
    check_cap(estimate)?;
    let rates = single_uav_rates(s, trajectory)?;
    if kk == 0 || nn == 0 {
        return Ok((Schedule::zeros(1, kk, nn), 0.0));
    }

    let mut assign = vec![0usize; nn];
    let mut best = (f64::NEG_INFINITY, assign.clone());
    let mut acc = vec![0.0; kk];
    loop {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (n, &k) in assign.iter().enumerate() {
            acc[k] += rates.get(0, k, n);
        }
        let value = acc.iter().copied().fold(f64::INFINITY, f64::min) / nn as f64;
        if value > best.0 {
            best = (value, assign.clone());
        }
        // odometer increment, last slot fastest
        let mut i = nn;
        loop {
            if i == 0 {
                let mut sched = Schedule::zeros(1, kk, nn);
                for (n, &k) in best.1.iter().enumerate() {
                    sched.alpha.set(0, k, n, 1.0);
                }
                return Ok((sched, best.0));
            }
            i -= 1;
            assign[i] += 1;
            if assign[i] < kk {
                break;
            }
            assign[i] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    /// Lower-left and upper-right corners of the search box, meters.
    pub bounds: [Vec2<f64>; 2],
    pub step: f64,
    pub slot_count: usize,
    /// Only use points on the segment between the first two users.
    pub restrict_to_segment: bool,
}

impl GridSpec {
    /// Box around the users padded by one step.
    pub fn around_users(s: &Scenario, step: f64, slot_count: usize, restrict_to_segment: bool) -> Self {
        let pts = s.user_positions();
        let lo = pts.iter().fold(Vec2::new(f64::INFINITY, f64::INFINITY), |a, p| {
            Vec2::new(a.x.min(p.x), a.y.min(p.y))
        });
        let hi = pts.iter().fold(Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| {
            Vec2::new(a.x.max(p.x), a.y.max(p.y))
        });
        Self {
            bounds: [Vec2::new(lo.x - step, lo.y - step), Vec2::new(hi.x + step, hi.y + step)],
            step,
            slot_count,
            restrict_to_segment,
        }
    }

    /// Candidate waypoint locations, in a fixed order.
    pub fn points(&self, s: &Scenario) -> Result<Vec<Vec2<f64>>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::Schema(vec![format!("grid step must be positive, got {}", self.step)]));
        }
        if self.restrict_to_segment {
            if s.users.len() < 2 {
                return Err(Error::Unsupported("segment grid needs two users".into()));
            }
            let (a, b) = (s.users[0].position, s.users[1].position);
            let len = a.dist(b);
            let count = (len / self.step + 1e-9).floor() as usize;
            let mut pts: Vec<Vec2<f64>> = (0..=count)
                .map(|i| a + (b - a).scale(i as f64 * self.step / len.max(1e-300)))
                .collect();
            if len - count as f64 * self.step > 1e-9 * (1.0 + len) {
                pts.push(b);
            }
            return Ok(pts);
        }
        let [lo, hi] = self.bounds;
        if !(hi.x >= lo.x && hi.y >= lo.y) {
            return Err(Error::Schema(vec!["grid bounds are inverted".into()]));
        }
        let nx = ((hi.x - lo.x) / self.step + 1e-9).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / self.step + 1e-9).floor() as usize + 1;
        check_cap((nx * ny) as f64)?;
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Vec2::new(lo.x + i as f64 * self.step, lo.y + j as f64 * self.step));
            }
        }
        Ok(pts)
    }

    /// Largest distance from any point of the searched set to its nearest
    /// grid point.
    pub fn covering_radius(&self) -> f64 {
        if self.restrict_to_segment {
            0.5 * self.step
        } else {
            0.5 * self.step * std::f64::consts::SQRT_2
        }
    }
}

/// Lipschitz constant of the full-power link rate with respect to the
/// horizontal UAV position, bps/Hz per meter, maximized over UAVs.
///
/// With `a = H²` and `γ` the reference SNR, `|dr/dd| = 2dγ / (ln2 (a+d²)(a+d²+γ))`,
/// and `2d/(a+d²) ≤ 1/√a`, `a+d²+γ ≥ a+γ`.
pub fn rate_lipschitz(s: &Scenario) -> f64 {
    (0..s.uavs.len())
        .map(|m| {
            let a = s.uavs[m].altitude * s.uavs[m].altitude;
            let g = s.reference_snr(m);
            g / (std::f64::consts::LN_2 * a.sqrt() * (a + g))
        })
        .fold(0.0, f64::max)
}

/// Certified slack between the grid optimum and the optimum over the
/// searched set: moving every waypoint to its nearest grid point changes
/// each slot rate, and so the common throughput, by at most this much.
pub fn epsilon_grid(s: &Scenario, grid: &GridSpec) -> f64 {
    rate_lipschitz(s) * grid.step
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub plan: Plan,
    pub candidates_evaluated: u64,
    /// Distinct slot multisets scored by the LP.
    pub lp_solves: u64,
    pub epsilon_grid: f64,
}

/// Exhaustive search over closed waypoint sequences on the grid, each scored
/// by the optimal relaxed schedule. Consecutive waypoints (including the
/// wrap-around) must be within one slot of flight at V_max.
///
/// The schedule LP does not depend on slot order, so scores are cached per
/// multiset of grid points.
pub fn grid_search_trajectory(s: &Scenario, grid: &GridSpec) -> Result<OracleResult> {
    if s.uavs.len() != 1 {
        return Err(Error::Unsupported(format!("oracle needs one UAV, got {}", s.uavs.len())));
    }
    let nn = grid.slot_count;
    if nn == 0 || nn > MAX_GRID_SLOTS {
        return Err(Error::Schema(vec![format!(
            "grid slot_count must be in 1..={MAX_GRID_SLOTS}, got {nn}"
        )]));
    }
    if s.grid.slot_count != nn {
        return Err(Error::Schema(vec![format!(
            "scenario has {} slots but the grid has {nn}",
            s.grid.slot_count
        )]));
    }
    let pts = grid.points(s)?;
    check_cap((pts.len() as f64).powi(nn as i32))?;

    let reach = s.uavs[0].v_max * s.grid.slot_len() * (1.0 + 1e-12);
    let neighbors: Vec<Vec<usize>> = pts
        .iter()
        .map(|p| (0..pts.len()).filter(|&j| p.dist(pts[j]) <= reach).collect())
        .collect();
    let kk = s.users.len();
    let (uav, noise) = (&s.uavs[0], s.channel.noise_power);
    // per grid point, per user rate
    let point_rates: Vec<Vec<f64>> = pts
        .iter()
        .map(|&p| {
            s.users
                .iter()
                .map(|u| link_rate(los_gain(p, uav.altitude, u.position, s.channel.beta0), uav.tx_power, noise))
                .collect()
        })
        .collect();

    let mut cache: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut candidates = 0u64;
    let mut seq = Vec::with_capacity(nn);
    let mut err = None;
    for start in 0..pts.len() {
        seq.clear();
        seq.push(start);
        search(
            &mut seq,
            nn,
            &neighbors,
            &mut |seq: &[usize]| {
                candidates += 1;
                let mut key = seq.to_vec();
                key.sort_unstable();
                let value = match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let mut rates = RateTensor::zeros(1, kk, nn);
                        for (n, &i) in seq.iter().enumerate() {
                            for k in 0..kk {
                                rates.set(0, k, n, point_rates[i][k]);
                            }
                        }
                        let v = match schedule_lp_from_rates(&rates) {
                            Ok((_, v)) => v,
                            Err(e) => {
                                err.get_or_insert(e);
                                f64::NEG_INFINITY
                            }
                        };
                        cache.insert(key, v);
                        v
                    }
                };
                if best.as_ref().map_or(true, |(b, _)| value > *b) {
                    best = Some((value, seq.to_vec()));
                }
            },
        );
    }
    if let Some(e) = err {
        return Err(e);
    }
    let (_, seq) = best.ok_or_else(|| Error::InvariantViolation("no feasible grid sequence".into()))?;
    let trajectory = Trajectory::from_waypoints(seq.iter().map(|&i| pts[i]).collect());
    let rates = single_uav_rates(s, &trajectory)?;
    let (schedule, _) = schedule_lp_from_rates(&rates)?;
    let plan = Plan::assemble(s, vec![trajectory], schedule, PowerProfile::full(s))?;
    Ok(OracleResult {
        plan,
        candidates_evaluated: candidates,
        lp_solves: cache.len() as u64,
        epsilon_grid: epsilon_grid(s, grid),
    })
}

fn search(seq: &mut Vec<usize>, len: usize, neighbors: &[Vec<usize>], visit: &mut impl FnMut(&[usize])) {
    let last = *seq.last().expect("sequence starts non-empty");
    if seq.len() == len {
        if neighbors[last].binary_search(&seq[0]).is_ok() {
            visit(seq);
        }
        return;
    }
    for &j in &neighbors[last] {
        seq.push(j);
        search(seq, len, neighbors, visit);
        seq.pop();
    }
}

/// Least-energy speed profile over a closed path of the given length, by
/// enumerating multisets of `slots` speeds drawn from `levels`. A profile is
/// admissible when the distance it covers, `Σ v·dt`, is within `tol` meters
/// of `path_length`. Returns the speeds in ascending order and their energy.
///
/// Slot order does not change energy or distance, so multisets suffice.
pub fn speed_profile_oracle(
    model: &EnergyModelParams,
    levels: &[f64],
    slots: usize,
    dt: f64,
    path_length: f64,
    tol: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // C(L + N - 1, N)
    let l = levels.len();
    let estimate = (1..=slots).fold(1.0, |acc, i| acc * (l + i - 1) as f64 / i as f64);
    check_cap(estimate)?;
    let power: Vec<f64> = levels.iter().map(|&v| propulsion_power(model, v)).collect::<Result<_>>()?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut pick = Vec::with_capacity(slots);
    fn rec(
        pick: &mut Vec<usize>,
        from: usize,
        slots: usize,
        ctx: &(&[f64], &[f64], f64, f64, f64),
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let (levels, power, dt, path_length, tol) = *ctx;
        if pick.len() == slots {
            let dist: f64 = pick.iter().map(|&i| levels[i] * dt).sum();
            if (dist - path_length).abs() <= tol {
                let e: f64 = pick.iter().map(|&i| power[i] * dt).sum();
                if best.as_ref().map_or(true, |(b, _)| e < *b) {
                    *best = Some((e, pick.clone()));
                }
            }
            return;
        }
        for i in from..levels.len() {
            pick.push(i);
            rec(pick, i, slots, ctx, best);
            pick.pop();
        }
    }
    rec(&mut pick, 0, slots, &(&levels, &power, dt, path_length, tol), &mut best);
    let (energy, pick) =
        best.ok_or_else(|| Error::Domain(format!("no speed profile covers {path_length} m within {tol} m")))?;
    Ok((pick.iter().map(|&i| levels[i]).collect(), energy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planners::schedule_lp;

    fn tiny(period: f64, slots: usize) -> Scenario {
        Scenario::two_user_reference(period, slots)
    }

    #[test]
    fn one_slot_binary_schedule_starves_a_user() {
        let s = tiny(1.0, 1);
        let t = Trajectory::stationary(Vec2::zero(), 1);
        let (_, binary) = brute_force_schedule(&t, &s).unwrap();
        let (_, lp) = schedule_lp(&t, &s).unwrap();
        assert_eq!(binary, 0.0);
        assert!(lp > 0.1);
    }

    #[test]
    fn symmetric_trajectory_alternates() {
        let s = tiny(4.0, 4);
        let t = Trajectory::stationary(Vec2::zero(), 4);
        let (sched, binary) = brute_force_schedule(&t, &s).unwrap();
        let (_, lp) = schedule_lp(&t, &s).unwrap();
        let r = crate::channel::link_rate(1e-5 / (1e4 + 1e6), 0.1, 1e-14);
        assert!((binary - 0.5 * r).abs() < 1e-12);
        assert!(lp >= binary - 1e-9);
        let per_user: Vec<f64> = (0..2).map(|k| (0..4).map(|n| sched.get(0, k, n)).sum()).collect();
        assert_eq!(per_user, vec![2.0, 2.0]);
    }

    #[test]
    fn too_many_slots_is_refused() {
        let s = tiny(13.0, 13);
        let t = Trajectory::stationary(Vec2::zero(), 13);
        assert!(matches!(brute_force_schedule(&t, &s), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn frozen_grid_returns_best_static_point() {
        // one slot of flight is shorter than the grid step
        let s = tiny(4.0, 4);
        let grid = GridSpec::around_users(&s, 500.0, 4, true);
        let res = grid_search_trajectory(&s, &grid).unwrap();
        let q = res.plan.trajectories[0].positions[0];
        assert!(res.plan.trajectories[0].positions.iter().all(|p| *p == q));
        let pts = grid.points(&s).unwrap();
        let best_static = pts
            .iter()
            .map(|&p| schedule_lp(&Trajectory::stationary(p, 4), &s).unwrap().1)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((res.plan.common_throughput - best_static).abs() < 1e-9);
    }

    #[test]
    fn generous_period_dwells_near_users() {
        let s = tiny(400.0, 4);
        let grid = GridSpec::around_users(&s, 250.0, 4, true);
        let res = grid_search_trajectory(&s, &grid).unwrap();
        let users = s.user_positions();
        for u in users {
            let nearest = res.plan.trajectories[0]
                .slot_positions()
                .iter()
                .map(|p| p.dist(u))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest <= 250.0 + 1e-9, "{nearest}");
        }
        assert!(res.lp_solves < res.candidates_evaluated);
    }

    #[test]
    fn oversized_grid_fails_fast() {
        let s = tiny(6.0, 6);
        let grid = GridSpec::around_users(&s, 10.0, 6, false);
        assert!(matches!(grid_search_trajectory(&s, &grid), Err(Error::InstanceTooLarge { .. })));
    }

    #[test]
    fn lipschitz_bound_dominates_finite_differences() {
        let s = tiny(10.0, 10);
        let l = rate_lipschitz(&s);
        let rate = |d: f64| crate::channel::link_rate(1e-5 / (1e4 + d * d), 0.1, 1e-14);
        let worst = (0..20000)
            .map(|i| {
                let d = i as f64 * 0.1;
                (rate(d) - rate(d + 0.01)).abs() / 0.01
            })
            .fold(0.0, f64::max);
        assert!(worst <= l && worst > 0.5 * l, "{worst} {l}");
    }

    #[test]
    fn constant_speed_is_cheapest() {
        let model = EnergyModelParams::FixedWing { c1: 9.26e-4, c2: 2250.0 };
        let levels: Vec<f64> = (1..=10).map(|i| 5.0 * i as f64).collect();
        let (profile, e) = speed_profile_oracle(&model, &levels, 6, 10.0, 1800.0, 1e-6).unwrap();
        assert_eq!(profile, vec![30.0; 6]);
        assert!((e - 60.0 * 100.002).abs() < 1e-6);
        assert!(speed_profile_oracle(&model, &levels, 6, 10.0, 1.0, 1e-6).is_err());
    }
}
