use proptest::prelude::*;

use uav_tradeoff::channel::{
    common_throughput, common_throughput_streaming, gain_tensor, link_rate, sinr_rate, PowerProfile,
    Schedule, Tensor3,
};
use uav_tradeoff::export::{fmt9, round9};
use uav_tradeoff::kinematics::{kinematic_residuals, Trajectory};
use uav_tradeoff::oracle::brute_force_schedule;
use uav_tradeoff::planners::{schedule_lp, schedule_lp_from_rates};
use uav_tradeoff::sca::{norm_sq_tangent, rate_of_sq_distance, rate_surrogate};
use uav_tradeoff::scenario::{Scenario, UserSpec};
use uav_tradeoff::Vec2;

fn point() -> impl Strategy<Value = Vec2<f64>> {
    (-1500.0..1500.0f64, -800.0..800.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

/// Reference scenario with `users` extra users and `uavs` UAVs.
fn scenario(users: &[Vec2<f64>], uavs: usize, slots: usize) -> Scenario {
    let mut s = Scenario::two_user_reference(10.0 * slots as f64, slots);
    s.users = users
        .iter()
        .enumerate()
        .map(|(k, &p)| UserSpec {
            id: format!("gu{}", k + 1),
            position: p,
        })
        .collect();
    let proto = s.uavs[0].clone();
    s.uavs = (0..uavs)
        .map(|m| {
            let mut u = proto.clone();
            u.id = format!("uav{}", m + 1);
            u
        })
        .collect();
    s
}

/// Column-normalized random shares: each user at most 1 per slot, each UAV at
/// most 1 per slot.
fn random_schedule(raw: &[f64], uavs: usize, users: usize, slots: usize) -> Schedule {
    let mut alpha = Tensor3::zeros(uavs, users, slots);
    let norm = users.max(uavs) as f64;
    let mut i = 0;
    for m in 0..uavs {
        for k in 0..users {
            for n in 0..slots {
                alpha.set(m, k, n, raw[i % raw.len()] / norm);
                i += 1;
            }
        }
    }
    Schedule { alpha }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn streaming_matches_tensor_throughput(
        users in prop::collection::vec(point(), 1..5),
        path in prop::collection::vec(point(), 6),
        raw in prop::collection::vec(0.0..1.0f64, 1..40),
        p in prop::collection::vec(0.0..0.1f64, 12),
        uavs in 1..3usize,
    ) {
        let slots = 3;
        let s = scenario(&users, uavs, slots);
        let trajs: Vec<Trajectory> = (0..uavs)
            .map(|m| Trajectory::from_waypoints(path[m * slots..(m + 1) * slots].to_vec()))
            .collect();
        let sched = random_schedule(&raw, uavs, users.len(), slots);
        let powers = PowerProfile::from_rows((0..uavs).map(|m| p[m * slots..(m + 1) * slots].to_vec()).collect());
        let (a_users, a) = common_throughput(&s, &trajs, &sched, &powers).unwrap();
        let (b_users, b) = common_throughput_streaming(&s, &trajs, &sched, &powers).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        for (x, y) in a_users.iter().zip(&b_users) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            prop_assert!(a <= *x);
        }
    }

    #[test]
    fn interference_only_lowers_rates(
        users in prop::collection::vec(point(), 1..4),
        path in prop::collection::vec(point(), 2),
        p in prop::collection::vec(0.0..0.1f64, 2),
    ) {
        let s = scenario(&users, 2, 1);
        let trajs: Vec<Trajectory> = path.iter().map(|&q| Trajectory::stationary(q, 1)).collect();
        let gains = gain_tensor(&s, &trajs);
        let powers = PowerProfile::from_rows(vec![vec![p[0]], vec![p[1]]]);
        for m in 0..2 {
            for k in 0..users.len() {
                let sinr = sinr_rate(m, k, 0, &gains, &powers, s.channel.noise_power);
                let snr = link_rate(gains.get(m, k, 0), powers.get(m, 0), s.channel.noise_power);
                prop_assert!(sinr <= snr);
                let interference = powers.get(1 - m, 0) * gains.get(1 - m, k, 0);
                if interference == 0.0 {
                    prop_assert_eq!(sinr, snr);
                }
            }
        }
    }

    #[test]
    fn more_airtime_never_hurts(
        users in prop::collection::vec(point(), 1..4),
        path in prop::collection::vec(point(), 4),
        raw in prop::collection::vec(0.0..0.5f64, 1..20),
        which in 0..100usize,
        bump in 0.0..0.5f64,
    ) {
        let kk = users.len();
        let s = scenario(&users, 1, 4);
        let trajs = vec![Trajectory::from_waypoints(path)];
        let powers = PowerProfile::full(&s);
        let sched = random_schedule(&raw, 1, kk, 4);
        let (before, _) = common_throughput(&s, &trajs, &sched, &powers).unwrap();
        let mut bumped = sched.clone();
        let (k, n) = (which % kk, (which / kk) % 4);
        let used: f64 = (0..kk).map(|j| bumped.get(0, j, n)).sum();
        let v = bumped.get(0, k, n) + bump.min(1.0 - used).max(0.0);
        bumped.alpha.set(0, k, n, v);
        let (after, _) = common_throughput(&s, &trajs, &bumped, &powers).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(a >= b);
        }
    }

    #[test]
    fn rate_tangent_is_a_global_underestimator(
        gamma0 in 1e4..1e10f64,
        h in 10.0..500.0f64,
        x_r in 0.0..1e7f64,
        x in 0.0..1e7f64,
    ) {
        let h2 = h * h;
        let sur = rate_surrogate(gamma0, h2, x_r);
        let f = rate_of_sq_distance(gamma0, h2, x);
        prop_assert!(sur.eval(x) <= f + 1e-9);
        prop_assert!((sur.eval(x_r) - rate_of_sq_distance(gamma0, h2, x_r)).abs() <= 1e-12 * (1.0 + f.abs()));
    }

    #[test]
    fn norm_tangent_is_below_the_norm(r in point(), x in point()) {
        let lin = norm_sq_tangent(r);
        prop_assert!(lin.eval(x) <= x.norm_sq() + 1e-9 * (1.0 + x.norm_sq()));
        prop_assert!((lin.eval(r) - r.norm_sq()).abs() <= 1e-9 * (1.0 + r.norm_sq()));
    }

    #[test]
    fn lp_schedule_is_feasible_and_dominates(
        users in prop::collection::vec(point(), 2..4),
        path in prop::collection::vec(point(), 4),
        raw in prop::collection::vec(0.0..1.0f64, 1..30),
    ) {
        let kk = users.len();
        let s = scenario(&users, 1, 4);
        let traj = Trajectory::from_waypoints(path);
        let (sched, r_lp) = schedule_lp(&traj, &s).unwrap();
        prop_assert!(sched.violations().is_empty());
        let powers = PowerProfile::full(&s);
        let trajs = vec![traj.clone()];
        let (_, r_eval) = common_throughput(&s, &trajs, &sched, &powers).unwrap();
        prop_assert!((r_eval - r_lp).abs() <= 1e-7 * (1.0 + r_lp));
        let (_, r_rand) = common_throughput(&s, &trajs, &random_schedule(&raw, 1, kk, 4), &powers).unwrap();
        prop_assert!(r_rand <= r_lp + 1e-7);
        let (_, r_bf) = brute_force_schedule(&traj, &s).unwrap();
        prop_assert!(r_bf <= r_lp + 1e-7);
    }

    #[test]
    fn lp_respects_simple_upper_bounds(
        rates in prop::collection::vec(0.0..10.0f64, 6),
    ) {
        // two users, three slots: the LP can never beat the better user's
        // own average or half the best-served sum
        let mut t = Tensor3::zeros(1, 2, 3);
        for n in 0..3 {
            t.set(0, 0, n, rates[n]);
            t.set(0, 1, n, rates[3 + n]);
        }
        let (sched, r) = schedule_lp_from_rates(&t).unwrap();
        prop_assert!(sched.violations().is_empty());
        let best: f64 = (0..3).map(|n| rates[n].max(rates[3 + n])).sum::<f64>() / 3.0;
        prop_assert!(r <= best / 2.0 + 1e-7);
        let avg0 = rates[..3].iter().sum::<f64>() / 3.0;
        let avg1 = rates[3..].iter().sum::<f64>() / 3.0;
        prop_assert!(r <= avg0.min(avg1) + 1e-7);
    }

    #[test]
    fn fmt9_keeps_nine_digits(x in prop::num::f64::NORMAL) {
        let y: f64 = fmt9(x).parse().unwrap();
        prop_assert!((y - x).abs() <= 5e-9 * x.abs());
        prop_assert_eq!(round9(y), y);
    }

    #[test]
    fn integrated_trajectories_have_no_equation_residual(
        q0 in point(),
        v0 in (-20.0..20.0f64, -20.0..20.0f64),
        acc in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2..30),
    ) {
        let n = acc.len();
        let dt = 0.5;
        let mut accelerations: Vec<Vec2<f64>> = acc.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
        let mut velocities = vec![Vec2::new(v0.0, v0.1)];
        for a in &accelerations[..n - 1] {
            let v = *velocities.last().unwrap();
            velocities.push(v + a.scale(dt));
        }
        // close the velocity loop so every equation holds
        accelerations[n - 1] = (velocities[0] - velocities[n - 1]).scale(1.0 / dt);
        let t = Trajectory::integrate(q0, velocities, accelerations, dt);
        let mut s = Scenario::two_user_reference(dt * n as f64, n);
        s.uavs[0].v_max = 1e3;
        let r = kinematic_residuals(&t, &s.uavs[0], &s.grid).unwrap();
        prop_assert!(r.max_kinematic_residual <= 1e-9, "residual {}", r.max_kinematic_residual);
        prop_assert_eq!(r.max_speed_violation, 0.0);
    }
}
