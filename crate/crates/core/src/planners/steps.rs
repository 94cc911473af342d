//! One SCA step per block: build the convex surrogate subproblem at the
//! current plan, solve it, and map the solution back.

use crate::channel::{los_gain, PowerProfile, Schedule};
use crate::kinematics::Trajectory;
use crate::sca::{
    log_sum_inv_tangent, solve_convex_subproblem, Func, InvTerm, LinearEq, OrderKey, Piece, SubproblemSpec,
    SubproblemStatus, Tolerances,
};
use crate::scalar::Vec2;
use crate::scenario::{EnergyModelParams, Scenario};

/// Shares below this are treated as unscheduled when building surrogates.
const ALPHA_FLOOR: f64 = 1e-12;

/// Concave lower bound of `weight·rate(m → k)` at one slot, subtracted from
/// the epigraph row `f`. `pos[j]` are the variable indices of UAV `j`'s
/// position, `q_r[j]` its current value, `a[j] = p_j·β0/σ²`.
fn subtract_rate_bound(
    f: &mut Func,
    pos: &[[usize; 2]],
    q_r: &[Vec2<f64>],
    w: Vec2<f64>,
    a: &[f64],
    h2: &[f64],
    serving: usize,
    weight: f64,
) {
    let mm = a.len();
    let d_r: Vec<f64> = q_r.iter().map(|q| q.dist_sq(w)).collect();
    let (value, grads) = log_sum_inv_tangent(a, h2, &d_r);
    let mut c = value;
    for j in 0..mm {
        c -= grads[j] * d_r[j];
        if grads[j] != 0.0 {
            f.push(Piece::norm_sq_affine(&[(pos[j], 1.0)], -w, -weight * grads[j]));
        }
    }
    f.constant -= weight * c;

    // interference: distances replaced by their tangent lower bounds, which
    // upper-bounds the interference term
    let others: Vec<usize> = (0..mm).filter(|&j| j != serving && a[j] > 0.0).collect();
    if others.is_empty() {
        return;
    }
    let idx: Vec<usize> = others.iter().flat_map(|&j| pos[j]).collect();
    let terms = others
        .iter()
        .enumerate()
        .map(|(t, &j)| {
            let r = q_r[j] - w;
            let mut coeffs = vec![0.0; idx.len()];
            coeffs[2 * t] = 2.0 * r.x;
            coeffs[2 * t + 1] = 2.0 * r.y;
            InvTerm {
                numerator: a[j],
                offset: h2[j] - r.norm_sq() - 2.0 * r.dot(w),
                coeffs,
            }
        })
        .collect();
    f.push(Piece::LogSumInv { idx, terms, weight });
}

/// Epigraph rows `η − Σ (alpha/N)·rate_bound ≤ 0`, one per user.
fn epigraph_rows(
    s: &Scenario,
    schedule: &Schedule,
    powers: &PowerProfile,
    positions: &dyn Fn(usize, usize) -> Vec2<f64>,
    pos_index: &dyn Fn(usize, usize) -> [usize; 2],
    eta: usize,
) -> Vec<Func> {
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    let h2: Vec<f64> = s.uavs.iter().map(|u| u.altitude * u.altitude).collect();
    let scale = s.channel.beta0 / s.channel.noise_power;
    (0..kk)
        .map(|k| {
            let w = s.users[k].position;
            let mut f = Func::new();
            f.add_linear(eta, 1.0);
            for n in 0..nn {
                let a: Vec<f64> = (0..mm).map(|j| powers.get(j, n) * scale).collect();
                let q_r: Vec<Vec2<f64>> = (0..mm).map(|j| positions(j, n)).collect();
                let pos: Vec<[usize; 2]> = (0..mm).map(|j| pos_index(j, n)).collect();
                for m in 0..mm {
                    let alpha = schedule.get(m, k, n);
                    if alpha > ALPHA_FLOOR && a[m] > 0.0 {
                        subtract_rate_bound(&mut f, &pos, &q_r, w, &a, &h2, m, alpha / nn as f64);
                    }
                }
            }
            f
        })
        .collect()
}

/// Largest `η` strictly inside every epigraph row at `x` (whose `η` entry is
/// ignored).
fn interior_eta(rows: &[Func], x: &mut [f64], eta: usize) -> bool {
    x[eta] = 0.0;
    let mut worst = f64::INFINITY;
    for f in rows {
        match f.eval(x) {
            Some(v) => worst = worst.min(-v),
            None => return false,
        }
    }
    x[eta] = worst - 1e-4 * (1.0 + worst.abs());
    true
}

pub(crate) struct StepOutcome<T> {
    pub value: T,
    pub status: SubproblemStatus,
}

/// Waypoint-only trajectory step for any number of UAVs.
pub(crate) fn waypoint_trajectory_step(
    s: &Scenario,
    trajectories: &[Trajectory],
    schedule: &Schedule,
    powers: &PowerProfile,
    tol: &Tolerances,
) -> StepOutcome<Vec<Trajectory>> {
    let (mm, nn) = (s.uavs.len(), s.grid.slot_count);
    let dt = s.grid.slot_len();
    let idx = |m: usize, n: usize| [2 * (m * nn + n), 2 * (m * nn + n) + 1];
    let eta = 2 * mm * nn;
    let mut order = Vec::with_capacity(eta + 1);
    for _ in 0..mm {
        for n in 0..nn {
            order.push(OrderKey::Stage(n as u32));
            order.push(OrderKey::Stage(n as u32));
        }
    }
    order.push(OrderKey::Last);
    let mut spec = SubproblemSpec::new(order);
    spec.objective.add_linear(eta, 1.0);

    for (m, u) in s.uavs.iter().enumerate() {
        let reach = u.v_max * dt;
        for n in 0..nn {
            let mut f = Func::with_constant(-1.0);
            f.push(Piece::norm_sq_affine(
                &[(idx(m, (n + 1) % nn), 1.0), (idx(m, n), -1.0)],
                Vec2::zero(),
                1.0 / (reach * reach),
            ));
            spec.inequalities.push(f);
        }
    }
    let rows = epigraph_rows(s, schedule, powers, &|m, n| trajectories[m].positions[n], &idx, eta);

    let mut x = vec![0.0; eta + 1];
    for m in 0..mm {
        for n in 0..nn {
            let p = trajectories[m].positions[n];
            let [ix, iy] = idx(m, n);
            x[ix] = p.x;
            x[iy] = p.y;
        }
    }
    if !interior_eta(&rows, &mut x, eta) {
        return StepOutcome {
            value: trajectories.to_vec(),
            status: SubproblemStatus::Infeasible,
        };
    }
    spec.inequalities.extend(rows);
    let sol = solve_convex_subproblem(&spec, &x, tol);
    let value = (0..mm)
        .map(|m| {
            Trajectory::from_waypoints(
                (0..nn)
                    .map(|n| {
                        let [ix, iy] = idx(m, n);
                        Vec2::new(sol.point[ix], sol.point[iy])
                    })
                    .collect(),
            )
        })
        .collect();
    StepOutcome {
        value,
        status: sol.status,
    }
}

/// Full-kinematic single-UAV trajectory step with the fixed-wing energy
/// budget, using slack speeds `τ ≤ ‖v‖²` (linearized) so that the
/// `c2/‖v‖` term becomes the convex `c2/√τ`.
pub(crate) fn kinematic_trajectory_step(
    s: &Scenario,
    trajectory: &Trajectory,
    schedule: &Schedule,
    powers: &PowerProfile,
    tol: &Tolerances,
) -> StepOutcome<Trajectory> {
    let u = &s.uavs[0];
    let nn = s.grid.slot_count;
    let dt = s.grid.slot_len();
    // per slot: qx qy vx vy ax ay τ
    let q = |n: usize| [7 * n, 7 * n + 1];
    let v = |n: usize| [7 * n + 2, 7 * n + 3];
    let a = |n: usize| [7 * n + 4, 7 * n + 5];
    let tau = |n: usize| 7 * n + 6;
    let eta = 7 * nn;
    let mut order: Vec<OrderKey> = (0..eta).map(|i| OrderKey::Stage((i / 7) as u32)).collect();
    order.push(OrderKey::Last);
    let mut spec = SubproblemSpec::new(order);
    spec.objective.add_linear(eta, 1.0);

    for n in 0..nn {
        let next = (n + 1) % nn;
        for axis in 0..2 {
            spec.equalities.push(LinearEq {
                terms: vec![
                    (q(next)[axis], 1.0),
                    (q(n)[axis], -1.0),
                    (v(n)[axis], -dt),
                    (a(n)[axis], -0.5 * dt * dt),
                ],
                rhs: 0.0,
                stage: n as u32,
            });
            spec.equalities.push(LinearEq {
                terms: vec![(v(next)[axis], 1.0), (v(n)[axis], -1.0), (a(n)[axis], -dt)],
                rhs: 0.0,
                stage: n as u32,
            });
        }
    }
    let vmax2 = u.v_max * u.v_max;
    for n in 0..nn {
        let mut speed = Func::with_constant(-1.0);
        speed.push(Piece::norm_sq_affine(&[(v(n), 1.0)], Vec2::zero(), 1.0 / vmax2));
        spec.inequalities.push(speed);
        if u.a_max.is_finite() {
            let mut acc = Func::with_constant(-1.0);
            acc.push(Piece::norm_sq_affine(&[(a(n), 1.0)], Vec2::zero(), 1.0 / (u.a_max * u.a_max)));
            spec.inequalities.push(acc);
        }
        if u.v_min > 0.0 {
            let mut floor = Func::with_constant(1.0);
            floor.add_linear(tau(n), -1.0 / (u.v_min * u.v_min));
            spec.inequalities.push(floor);
        }
        // τ ≤ 2 v_r·v − ‖v_r‖²
        let vr = trajectory.velocities[n];
        let mut slack = Func::with_constant(vr.norm_sq() / vmax2);
        slack
            .add_linear(tau(n), 1.0 / vmax2)
            .add_linear(v(n)[0], -2.0 * vr.x / vmax2)
            .add_linear(v(n)[1], -2.0 * vr.y / vmax2);
        spec.inequalities.push(slack);
    }
    if let (EnergyModelParams::FixedWing { c1, c2 }, Some(budget)) = (s.energy, u.energy_budget) {
        let mut energy = Func::with_constant(-1.0);
        for n in 0..nn {
            energy.push(Piece::NormCubed {
                idx: v(n),
                weight: dt * c1 / budget,
            });
            energy.push(Piece::InvSqrt {
                idx: tau(n),
                weight: dt * c2 / budget,
            });
        }
        spec.inequalities.push(energy);
    }
    let rows = epigraph_rows(s, schedule, powers, &|_, n| trajectory.positions[n], &|_, n| q(n), eta);

    let mut x = vec![0.0; eta + 1];
    for n in 0..nn {
        let (p, vel, acc) = (trajectory.positions[n], trajectory.velocities[n], trajectory.accelerations[n]);
        x[q(n)[0]] = p.x;
        x[q(n)[1]] = p.y;
        x[v(n)[0]] = vel.x;
        x[v(n)[1]] = vel.y;
        x[a(n)[0]] = acc.x;
        x[a(n)[1]] = acc.y;
        x[tau(n)] = vel.norm_sq();
    }
    if !interior_eta(&rows, &mut x, eta) {
        return StepOutcome {
            value: trajectory.clone(),
            status: SubproblemStatus::Infeasible,
        };
    }
    spec.inequalities.extend(rows);
    let sol = solve_convex_subproblem(&spec, &x, tol);
    let pt = |i: [usize; 2]| Vec2::new(sol.point[i[0]], sol.point[i[1]]);
    let mut positions: Vec<Vec2<f64>> = (0..nn).map(|n| pt(q(n))).collect();
    positions.push(positions[0]);
    StepOutcome {
        value: Trajectory {
            fidelity: trajectory.fidelity,
            positions,
            velocities: (0..nn).map(|n| pt(v(n))).collect(),
            accelerations: (0..nn).map(|n| pt(a(n))).collect(),
        },
        status: sol.status,
    }
}

/// Transmit power step. Powers are normalized by each UAV's cap; the
/// interference log term is replaced by its tangent (an upper bound, as the
/// log is concave).
pub(crate) fn power_step(
    s: &Scenario,
    trajectories: &[Trajectory],
    schedule: &Schedule,
    powers: &PowerProfile,
    tol: &Tolerances,
) -> StepOutcome<PowerProfile> {
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    let rho = |m: usize, n: usize| m * nn + n;
    let eta = mm * nn;
    let mut order: Vec<OrderKey> = (0..eta).map(|i| OrderKey::Stage((i % nn) as u32)).collect();
    order.push(OrderKey::Last);
    let mut spec = SubproblemSpec::new(order);
    spec.objective.add_linear(eta, 1.0);
    for i in 0..eta {
        let mut hi = Func::with_constant(-1.0);
        hi.add_linear(i, 1.0);
        let mut lo = Func::new();
        lo.add_linear(i, -1.0);
        spec.inequalities.push(hi);
        spec.inequalities.push(lo);
    }

    let mut x = vec![0.0; eta + 1];
    for m in 0..mm {
        for n in 0..nn {
            x[rho(m, n)] = powers.get(m, n) / s.uavs[m].tx_power;
        }
    }
    let mut rows = Vec::with_capacity(kk);
    for (k, user) in s.users.iter().enumerate() {
        let mut f = Func::new();
        f.add_linear(eta, 1.0);
        for n in 0..nn {
            // b_j: received SNR of UAV j at full power
            let b: Vec<f64> = (0..mm)
                .map(|j| {
                    let g = los_gain(
                        trajectories[j].positions[n],
                        s.uavs[j].altitude,
                        user.position,
                        s.channel.beta0,
                    );
                    s.uavs[j].tx_power * g / s.channel.noise_power
                })
                .collect();
            let idx: Vec<usize> = (0..mm).map(|j| rho(j, n)).collect();
            for m in 0..mm {
                let alpha = schedule.get(m, k, n);
                if alpha <= ALPHA_FLOOR {
                    continue;
                }
                let w = alpha / nn as f64;
                f.push(Piece::NegLog2Affine {
                    idx: idx.clone(),
                    coeffs: b.clone(),
                    offset: 1.0,
                    weight: w,
                });
                let z_r = 1.0 + (0..mm).filter(|&j| j != m).map(|j| b[j] * x[rho(j, n)]).sum::<f64>();
                f.constant += w * (z_r.log2() - (z_r - 1.0) / (z_r * std::f64::consts::LN_2));
                for j in (0..mm).filter(|&j| j != m) {
                    f.add_linear(rho(j, n), w * b[j] / (z_r * std::f64::consts::LN_2));
                }
            }
        }
        rows.push(f);
    }
    if !interior_eta(&rows, &mut x, eta) {
        return StepOutcome {
            value: powers.clone(),
            status: SubproblemStatus::Infeasible,
        };
    }
    spec.inequalities.extend(rows);
    let sol = solve_convex_subproblem(&spec, &x, tol);
    let mut out = powers.clone();
    for m in 0..mm {
        let cap = s.uavs[m].tx_power;
        for n in 0..nn {
            out.set(m, n, (sol.point[rho(m, n)] * cap).clamp(0.0, cap));
        }
    }
    StepOutcome {
        value: out,
        status: sol.status,
    }
}
