//! Line-of-sight air-to-ground channel, achievable rates, and throughput
//! aggregation.
//!
//! The channel power gain follows the free-space law `β0 / d²` with `d` the
//! 3D UAV-to-user distance. Rates are spectral efficiencies in bps/Hz.

use crate::error::{Error, Result};
use crate::kinematics::Trajectory;
use crate::scalar::{Scalar, Vec2};
use crate::scenario::Scenario;

/// Tolerance used when checking schedule sums and power caps.
pub const INVARIANT_TOL: f64 = 1e-9;

/// `beta0 / (altitude² + ‖uav_pos − user_pos‖²)`.
pub fn los_gain<T: Scalar>(uav_pos: Vec2<T>, altitude: T, user_pos: Vec2<T>, beta0: T) -> T {
    beta0 / (altitude * altitude + uav_pos.dist_sq(user_pos))
}

/// `log2(1 + power·gain/noise)`.
pub fn link_rate<T: Scalar>(gain: T, power: T, noise: T) -> T {
    (power * gain / noise).ln_1p() / T::LN_2()
}

/// Dense `[m][k][n]` tensor of nonnegative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(uavs: usize, users: usize, slots: usize) -> Self {
        Self {
            dims: (uavs, users, slots),
            data: vec![0.0; uavs * users * slots],
        }
    }

    pub fn filled(uavs: usize, users: usize, slots: usize, v: f64) -> Self {
        Self {
            dims: (uavs, users, slots),
            data: vec![v; uavs * users * slots],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    #[inline]
    fn offset(&self, m: usize, k: usize, n: usize) -> usize {
        (m * self.dims.1 + k) * self.dims.2 + n
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize, n: usize) -> f64 {
        self.data[self.offset(m, k, n)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, k: usize, n: usize, v: f64) {
        let o = self.offset(m, k, n);
        self.data[o] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}

/// Linear channel power gains `h[m][k][n]`.
pub type GainTensor = Tensor3;

/// Per-slot rates `r[m][k][n]` (bps/Hz) of user `k` when served by UAV `m`.
pub type RateTensor = Tensor3;

/// Time-sharing fractions `alpha[m][k][n]` (relaxed TDMA).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub alpha: Tensor3,
}

impl Schedule {
    pub fn zeros(uavs: usize, users: usize, slots: usize) -> Self {
        Self {
            alpha: Tensor3::zeros(uavs, users, slots),
        }
    }

    /// `1/max(K, M)` everywhere, which satisfies both sum constraints.
    pub fn uniform(uavs: usize, users: usize, slots: usize) -> Self {
        let share = 1.0 / users.max(uavs).max(1) as f64;
        Self {
            alpha: Tensor3::filled(uavs, users, slots, share),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.alpha.dims()
    }

    pub fn get(&self, m: usize, k: usize, n: usize) -> f64 {
        self.alpha.get(m, k, n)
    }

    /// Empty when the per-UAV and per-user sums are within `[0, 1]`.
    pub fn violations(&self) -> Vec<String> {
        let (mm, kk, nn) = self.dims();
        let mut out = Vec::new();
        for m in 0..mm {
            for k in 0..kk {
                for n in 0..nn {
                    let a = self.get(m, k, n);
                    if !(a >= -INVARIANT_TOL && a <= 1.0 + INVARIANT_TOL) {
                        out.push(format!("alpha[{m}][{k}][{n}] = {a} outside [0, 1]"));
                    }
                }
            }
        }
        for n in 0..nn {
            for m in 0..mm {
                let s: f64 = (0..kk).map(|k| self.get(m, k, n)).sum();
                if s > 1.0 + INVARIANT_TOL {
                    out.push(format!("sum_k alpha[{m}][k][{n}] = {s} > 1"));
                }
            }
            for k in 0..kk {
                let s: f64 = (0..mm).map(|m| self.get(m, k, n)).sum();
                if s > 1.0 + INVARIANT_TOL {
                    out.push(format!("sum_m alpha[m][{k}][{n}] = {s} > 1"));
                }
            }
        }
        out
    }
}

/// Transmit powers `p[m][n]` in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    uavs: usize,
    slots: usize,
    data: Vec<f64>,
}

impl PowerProfile {
    /// Every UAV at its cap in every slot.
    pub fn full(s: &Scenario) -> Self {
        let n = s.grid.slot_count;
        let data = s
            .uavs
            .iter()
            .flat_map(|u| std::iter::repeat(u.tx_power).take(n))
            .collect();
        Self {
            uavs: s.uavs.len(),
            slots: n,
            data,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let uavs = rows.len();
        let slots = rows.first().map_or(0, Vec::len);
        Self {
            uavs,
            slots,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.uavs, self.slots)
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[m * self.slots + n]
    }

    pub fn set(&mut self, m: usize, n: usize, p: f64) {
        self.data[m * self.slots + n] = p;
    }

    pub fn violations(&self, s: &Scenario) -> Vec<String> {
        let mut out = Vec::new();
        for m in 0..self.uavs {
            let cap = s.uavs[m].tx_power;
            for n in 0..self.slots {
                let p = self.get(m, n);
                if !(p >= -INVARIANT_TOL * cap && p <= cap * (1.0 + INVARIANT_TOL)) {
                    out.push(format!("p[{m}][{n}] = {p} outside [0, {cap}]"));
                }
            }
        }
        out
    }
}

/// Gains of every UAV/user pair at every slot position.
pub fn gain_tensor(s: &Scenario, trajectories: &[Trajectory]) -> GainTensor {
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    let mut h = Tensor3::zeros(mm, kk, nn);
    for (m, t) in trajectories.iter().enumerate() {
        let alt = s.uavs[m].altitude;
        for (k, u) in s.users.iter().enumerate() {
            for n in 0..nn {
                h.set(m, k, n, los_gain(t.positions[n], alt, u.position, s.channel.beta0));
            }
        }
    }
    h
}

/// `log2(1 + p_m h_mk / (σ² + Σ_{j≠m} p_j h_jk))` at slot `n`.
pub fn sinr_rate(
    m: usize,
    k: usize,
    n: usize,
    gains: &GainTensor,
    powers: &PowerProfile,
    noise: f64,
) -> f64 {
    let (mm, _, _) = gains.dims();
    let interference: f64 = (0..mm)
        .filter(|&j| j != m)
        .map(|j| powers.get(j, n) * gains.get(j, k, n))
        .sum();
    link_rate(gains.get(m, k, n), powers.get(m, n), noise + interference)
}

pub fn rate_tensor(gains: &GainTensor, powers: &PowerProfile, noise: f64) -> RateTensor {
    let (mm, kk, nn) = gains.dims();
    let mut r = Tensor3::zeros(mm, kk, nn);
    for m in 0..mm {
        for k in 0..kk {
            for n in 0..nn {
                r.set(m, k, n, sinr_rate(m, k, n, gains, powers, noise));
            }
        }
    }
    r
}

/// Per-user throughput `(1/N) Σ_n Σ_m alpha·rate` and its minimum.
pub fn throughput_from_rates(rates: &RateTensor, schedule: &Schedule) -> (Vec<f64>, f64) {
    let (mm, kk, nn) = rates.dims();
    let per_user: Vec<f64> = (0..kk)
        .map(|k| {
            let mut acc = 0.0;
            for m in 0..mm {
                for n in 0..nn {
                    acc += schedule.get(m, k, n) * rates.get(m, k, n);
                }
            }
            acc / nn as f64
        })
        .collect();
    let r_com = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    (per_user, r_com)
}

fn check_components(
    s: &Scenario,
    trajectories: &[Trajectory],
    schedule: &Schedule,
    powers: &PowerProfile,
) -> Result<()> {
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    if trajectories.len() != mm {
        return Err(Error::LengthMismatch {
            what: "trajectories",
            got: trajectories.len(),
            expected: mm,
        });
    }
    for t in trajectories {
        if t.slot_count() != nn {
            return Err(Error::LengthMismatch {
                what: "trajectory slots",
                got: t.slot_count(),
                expected: nn,
            });
        }
    }
    if schedule.dims() != (mm, kk, nn) {
        return Err(Error::InvariantViolation(format!(
            "schedule dims {:?} != {:?}",
            schedule.dims(),
            (mm, kk, nn)
        )));
    }
    if powers.dims() != (mm, nn) {
        return Err(Error::InvariantViolation(format!(
            "power dims {:?} != {:?}",
            powers.dims(),
            (mm, nn)
        )));
    }
    let mut v = schedule.violations();
    v.extend(powers.violations(s));
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvariantViolation(v.join("; ")))
    }
}

/// Per-user throughputs and the common throughput `R_com`, via the full gain
/// and rate tensors.
pub fn common_throughput(
    s: &Scenario,
    trajectories: &[Trajectory],
    schedule: &Schedule,
    powers: &PowerProfile,
) -> Result<(Vec<f64>, f64)> {
    check_components(s, trajectories, schedule, powers)?;
    let gains = gain_tensor(s, trajectories);
    let rates = rate_tensor(&gains, powers, s.channel.noise_power);
    Ok(throughput_from_rates(&rates, schedule))
}

/// Same quantity as [`common_throughput`] evaluated slot by slot without
/// materializing the tensors.
pub fn common_throughput_streaming(
    s: &Scenario,
    trajectories: &[Trajectory],
    schedule: &Schedule,
    powers: &PowerProfile,
) -> Result<(Vec<f64>, f64)> {
    check_components(s, trajectories, schedule, powers)?;
    let (mm, kk, nn) = (s.uavs.len(), s.users.len(), s.grid.slot_count);
    let mut acc = vec![0.0; kk];
    let mut rx = vec![0.0; mm];
    for n in 0..nn {
        for (k, user) in s.users.iter().enumerate() {
            for m in 0..mm {
                let g = los_gain(
                    trajectories[m].positions[n],
                    s.uavs[m].altitude,
                    user.position,
                    s.channel.beta0,
                );
                rx[m] = powers.get(m, n) * g;
            }
            let total: f64 = rx.iter().sum();
            for m in 0..mm {
                let a = schedule.get(m, k, n);
                if a != 0.0 {
                    let interference = total - rx[m];
                    acc[k] += a * link_rate(1.0, rx[m], s.channel.noise_power + interference);
                }
            }
        }
    }
    let per_user: Vec<f64> = acc.into_iter().map(|a| a / nn as f64).collect();
    let r_com = per_user.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((per_user, r_com))
}
