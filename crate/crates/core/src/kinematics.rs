//! Discretized periodic UAV trajectories, feasibility residuals, and the
//! circular initializer.
//!
//! Two fidelity levels are supported. Waypoint-only trajectories carry
//! positions and a per-slot travel cap `‖q[n+1] − q[n]‖ ≤ V_max·δ`.
//! Full-kinematic trajectories also carry velocities and accelerations and
//! integrate exactly under piecewise-constant acceleration:
//!
//! ```text
//! q[n+1] = q[n] + v[n]·δ + ½·a[n]·δ²
//! v[n+1] = v[n] + a[n]·δ
//! ```
//!
//! Indices wrap, so `q[N] = q[0]` and `v[N] = v[0]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{centroid, Vec2};
use crate::scenario::{Scenario, TimeGrid, UavSpec};

/// Position residual tolerance, meters.
pub const POSITION_TOL: f64 = 1e-6;
/// Speed and acceleration violation tolerance.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    WaypointOnly,
    FullKinematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub fidelity: Fidelity,
    /// `N + 1` positions; the last repeats the first.
    pub positions: Vec<Vec2<f64>>,
    /// `N` velocities (full-kinematic only).
    pub velocities: Vec<Vec2<f64>>,
    /// `N` accelerations (full-kinematic only).
    pub accelerations: Vec<Vec2<f64>>,
}

impl Trajectory {
    /// Close a loop of `N` waypoints.
    pub fn from_waypoints(mut waypoints: Vec<Vec2<f64>>) -> Self {
        if let Some(&first) = waypoints.first() {
            waypoints.push(first);
        }
        Self {
            fidelity: Fidelity::WaypointOnly,
            positions: waypoints,
            velocities: Vec::new(),
            accelerations: Vec::new(),
        }
    }

    pub fn stationary(p: Vec2<f64>, slots: usize) -> Self {
        Self::from_waypoints(vec![p; slots])
    }

    /// Integrate from `q0` under the given per-slot velocities and
    /// accelerations. The final position is not forced back onto `q0`, so a
    /// non-periodic input shows up as a periodicity gap.
    pub fn integrate(q0: Vec2<f64>, velocities: Vec<Vec2<f64>>, accelerations: Vec<Vec2<f64>>, dt: f64) -> Self {
        let mut positions = Vec::with_capacity(velocities.len() + 1);
        let mut q = q0;
        positions.push(q);
        for (v, a) in velocities.iter().zip(&accelerations) {
            q = q + v.scale(dt) + a.scale(0.5 * dt * dt);
            positions.push(q);
        }
        Self {
            fidelity: Fidelity::FullKinematic,
            positions,
            velocities,
            accelerations,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.positions.len().saturating_sub(1)
    }

    /// Communication positions `q[0..N]`.
    pub fn slot_positions(&self) -> &[Vec2<f64>] {
        &self.positions[..self.slot_count()]
    }

    pub fn path_length(&self) -> f64 {
        self.positions.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    /// Copy with the shape of a waypoint-only trajectory.
    pub fn to_waypoints(&self) -> Self {
        Self::from_waypoints(self.slot_positions().to_vec())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Largest kinematic equation residual; velocity residuals are converted
    /// to meters by multiplying with δ.
    pub max_kinematic_residual: f64,
    pub max_speed_violation: f64,
    pub max_accel_violation: f64,
    pub periodicity_gap: f64,
    pub feasible: bool,
}

pub fn kinematic_residuals(t: &Trajectory, u: &UavSpec, g: &TimeGrid) -> Result<ResidualReport> {
    let n = g.slot_count;
    if t.positions.len() != n + 1 {
        return Err(Error::LengthMismatch {
            what: "positions",
            got: t.positions.len(),
            expected: n + 1,
        });
    }
    let dt = g.slot_len();
    let periodicity_gap = t.positions[0].dist(t.positions[n]);
    let mut kin = 0.0f64;
    let mut speed = 0.0f64;
    let mut accel = 0.0f64;
    match t.fidelity {
        Fidelity::WaypointOnly => {
            for w in t.positions.windows(2) {
                speed = speed.max(w[0].dist(w[1]) / dt - u.v_max);
            }
        }
        Fidelity::FullKinematic => {
            for (what, len) in [("velocities", t.velocities.len()), ("accelerations", t.accelerations.len())] {
                if len != n {
                    return Err(Error::LengthMismatch {
                        what,
                        got: len,
                        expected: n,
                    });
                }
            }
            for i in 0..n {
                let (q, v, a) = (t.positions[i], t.velocities[i], t.accelerations[i]);
                let q_next = q + v.scale(dt) + a.scale(0.5 * dt * dt);
                kin = kin.max(q_next.dist(t.positions[i + 1]));
                let v_next = v + a.scale(dt);
                kin = kin.max(v_next.dist(t.velocities[(i + 1) % n]) * dt);
                let s = v.norm();
                speed = speed.max(s - u.v_max).max(u.v_min - s);
                accel = accel.max(a.norm() - u.a_max);
            }
        }
    }
    let speed = speed.max(0.0);
    let accel = accel.max(0.0);
    Ok(ResidualReport {
        max_kinematic_residual: kin,
        max_speed_violation: speed,
        max_accel_violation: accel,
        periodicity_gap,
        feasible: kin <= POSITION_TOL
            && periodicity_gap <= POSITION_TOL
            && speed <= BOUND_TOL
            && accel <= BOUND_TOL,
    })
}

/// Per-slot speeds: `‖v[n]‖` or `‖q[n+1] − q[n]‖/δ`.
pub fn speed_profile(t: &Trajectory, g: &TimeGrid) -> Vec<f64> {
    match t.fidelity {
        Fidelity::FullKinematic => t.velocities.iter().map(|v| v.norm()).collect(),
        Fidelity::WaypointOnly => {
            let dt = g.slot_len();
            t.positions.windows(2).map(|w| w[0].dist(w[1]) / dt).collect()
        }
    }
}

/// Nearest-center partition of the users among `clusters` centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vec2<f64>>,
    /// Cluster index of each user.
    pub assignment: Vec<usize>,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k] == cluster)
            .collect()
    }
}

/// Deterministic k-means: farthest-point seeding (first seed is the user
/// farthest from the global centroid), then Lloyd iterations. Ties resolve to
/// the lowest index.
pub fn cluster_users(points: &[Vec2<f64>], clusters: usize) -> Clustering {
    let clusters = clusters.max(1);
    if points.is_empty() {
        return Clustering {
            centers: vec![Vec2::zero(); clusters],
            assignment: Vec::new(),
        };
    }
    let c0 = centroid(points);
    let farthest_from = |centers: &[Vec2<f64>]| -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = centers
                .iter()
                .map(|c| c.dist_sq(*p))
                .fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let mut centers = if clusters == 1 {
        vec![c0]
    } else {
        let mut seeds = vec![points[farthest_from(&[c0])]];
        while seeds.len() < clusters {
            seeds.push(points[farthest_from(&seeds)]);
        }
        seeds
    };
    let nearest = |centers: &[Vec2<f64>], p: Vec2<f64>| -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, c) in centers.iter().enumerate() {
            let d = c.dist_sq(p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    };
    let mut assignment: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
    for _ in 0..100 {
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<Vec2<f64>> = points
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(&p, _)| p)
                .collect();
            if !members.is_empty() {
                *center = centroid(&members);
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(&centers, p)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Clustering {
        centers,
        assignment,
    }
}

/// Center of the circle flown by UAV `uav_index`: the centroid of all users
/// for a single UAV, otherwise the center of its nearest-center cluster.
pub fn circle_center(s: &Scenario, uav_index: usize) -> Vec2<f64> {
    let pts = s.user_positions();
    if s.uavs.len() == 1 {
        centroid(&pts)
    } else {
        cluster_users(&pts, s.uavs.len()).centers[uav_index]
    }
}

/// A constant-speed circle traversed once per period.
///
/// Waypoint-only: the `N` waypoints sit on a circle of radius
/// `speed·δ / (2 sin(π/N))`, so every chord is exactly `speed·δ` and the
/// path length is `speed·T`. Full-kinematic: `‖v[n]‖ = speed` with the
/// heading advancing by `2π/N` per slot and `a[n] = (v[n+1] − v[n])/δ`.
pub fn circular_initial_trajectory(
    s: &Scenario,
    uav_index: usize,
    speed: f64,
    fidelity: Fidelity,
) -> Result<Trajectory> {
    let u = &s.uavs[uav_index];
    if !(speed >= u.v_min - BOUND_TOL && speed <= u.v_max + BOUND_TOL) {
        return Err(Error::InfeasibleSpeed(format!(
            "speed {speed} m/s outside [{}, {}]",
            u.v_min, u.v_max
        )));
    }
    let speed = speed.clamp(u.v_min, u.v_max);
    let n = s.grid.slot_count;
    let dt = s.grid.slot_len();
    let center = circle_center(s, uav_index);
    // stagger multi-UAV starting phases
    let phase = 2.0 * PI * uav_index as f64 / s.uavs.len() as f64;
    let step = 2.0 * PI / n as f64;
    match fidelity {
        Fidelity::WaypointOnly => {
            let r = speed * dt / (2.0 * (step / 2.0).sin());
            let pts = (0..n)
                .map(|i| {
                    let th = phase + step * i as f64;
                    center + Vec2::new(th.cos(), th.sin()).scale(r)
                })
                .collect();
            Ok(Trajectory::from_waypoints(pts))
        }
        Fidelity::FullKinematic => {
            let accel = 2.0 * speed * (step / 2.0).sin() / dt;
            if accel > u.a_max + BOUND_TOL {
                return Err(Error::InfeasibleSpeed(format!(
                    "circle at {speed} m/s needs {accel:.4} m/s² > a_max = {}",
                    u.a_max
                )));
            }
            // heading of v[i] is tangent to the radius at angle th
            let vel = |i: usize| {
                let th = phase + step * i as f64;
                Vec2::new(-th.sin(), th.cos()).scale(speed)
            };
            let velocities: Vec<Vec2<f64>> = (0..n).map(vel).collect();
            let accelerations: Vec<Vec2<f64>> =
                (0..n).map(|i| (vel(i + 1) - vel(i)).scale(1.0 / dt)).collect();
            // q[i+1] = q[i] + (v[i] + v[i+1])·δ/2, a regular polygon; shift
            // its centroid onto `center`
            let mut t = Trajectory::integrate(Vec2::zero(), velocities, accelerations, dt);
            let c = centroid(t.slot_positions());
            let shift = center - c;
            for p in &mut t.positions {
                *p = *p + shift;
            }
            let last = t.positions.len() - 1;
            t.positions[last] = t.positions[0];
            Ok(t)
        }
    }
}
