//! Propulsion power models and trajectory energy.
//!
//! Fixed-wing: `P(v) = c1·v³ + c2/v`, speed-only (the acceleration and
//! kinetic-energy correction terms are not modelled). Undefined at `v = 0`.
//!
//! Rotary-wing: blade profile + induced + parasite terms,
//! `P0(1 + 3v²/U²) + Pi·sqrt(sqrt(1 + v⁴/(4v0⁴)) − v²/(2v0²)) + k·v³`,
//! finite at hover.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinematics::{speed_profile, Trajectory};
use crate::scalar::Scalar;
use crate::scenario::{EnergyModelParams, RotaryWingParams, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerCurvePoint {
    pub speed: f64,
    pub power: f64,
}

pub fn fixed_wing_power<T: Scalar>(speed: T, c1: T, c2: T) -> Result<T> {
    if !(speed > T::zero()) {
        return Err(Error::Domain(format!(
            "fixed-wing power is undefined at speed {speed} m/s (model requires v > 0)"
        )));
    }
    Ok(c1 * speed.powi(3) + c2 / speed)
}

pub fn rotary_wing_power<T: Scalar>(speed: T, p: &RotaryWingParams) -> T {
    let (p0, pi, ut, v0, k) = (
        T::lit(p.blade_profile_power),
        T::lit(p.induced_power),
        T::lit(p.tip_speed),
        T::lit(p.induced_velocity),
        T::lit(p.parasite_coeff),
    );
    let v2 = speed * speed;
    let v0_2 = v0 * v0;
    let blade = p0 * (T::one() + T::lit(3.0) * v2 / (ut * ut));
    let induced_inner = (T::one() + v2 * v2 / (T::lit(4.0) * v0_2 * v0_2)).sqrt() - v2 / (T::lit(2.0) * v0_2);
    // the inner term is positive analytically but cancels at high speed
    let induced = pi * induced_inner.max(T::zero()).sqrt();
    blade + induced + k * v2 * speed
}

/// Propulsion power of `model` at `speed`.
pub fn propulsion_power(model: &EnergyModelParams, speed: f64) -> Result<f64> {
    match model {
        EnergyModelParams::None => Err(Error::Domain("no propulsion model configured".into())),
        EnergyModelParams::FixedWing { c1, c2 } => fixed_wing_power(speed, *c1, *c2),
        EnergyModelParams::RotaryWing(p) => {
            if speed < 0.0 {
                return Err(Error::Domain(format!("negative speed {speed}")));
            }
            Ok(rotary_wing_power(speed, p))
        }
    }
}

/// `Σ_n P(speed[n])·δ`, with per-slot speeds from [`speed_profile`].
pub fn trajectory_energy(t: &Trajectory, g: &TimeGrid, model: &EnergyModelParams) -> Result<f64> {
    let dt = g.slot_len();
    speed_profile(t, g)
        .into_iter()
        .map(|v| propulsion_power(model, v).map(|p| p * dt))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicSpeeds {
    /// argmin P(v): the endurance speed.
    pub min_power_speed: f64,
    /// argmin P(v)/v: the range speed.
    pub min_energy_per_meter_speed: f64,
}

/// Closed forms for fixed-wing, golden-section search for rotary-wing.
pub fn characteristic_speeds(model: &EnergyModelParams) -> Result<CharacteristicSpeeds> {
    match model {
        EnergyModelParams::None => Err(Error::Domain("no propulsion model configured".into())),
        EnergyModelParams::FixedWing { c1, c2 } => Ok(CharacteristicSpeeds {
            min_power_speed: (c2 / (3.0 * c1)).powf(0.25),
            min_energy_per_meter_speed: (c2 / c1).powf(0.25),
        }),
        EnergyModelParams::RotaryWing(p) => {
            let hi = 3.0 * p.tip_speed;
            Ok(CharacteristicSpeeds {
                min_power_speed: golden_section_min(|v| rotary_wing_power(v, p), 0.0, hi),
                min_energy_per_meter_speed: golden_section_min(
                    |v| rotary_wing_power(v, p) / v,
                    1e-6,
                    hi,
                ),
            })
        }
    }
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > 1e-11 * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// `speed_mps,power_w` points from `start` to `stop` (inclusive) at `step`.
pub fn power_curve(
    model: &EnergyModelParams,
    start: f64,
    stop: f64,
    step: f64,
) -> Result<Vec<PowerCurvePoint>> {
    if !(step > 0.0) || stop < start {
        return Err(Error::Domain(format!(
            "invalid speed range {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|i| {
            let speed = start + step * i as f64;
            propulsion_power(model, speed).map(|power| PowerCurvePoint { speed, power })
        })
        .collect()
}
