//! Closed-form single-UAV reference values.

use crate::channel::{link_rate, los_gain};
use crate::error::{Error, Result};
use crate::scalar::{centroid, Vec2};
use crate::scenario::Scenario;

/// Max-min value of fractional time sharing among links with fixed rates:
/// `1 / Σ_k 1/r_k`, zero if any rate is zero.
pub fn water_level(rates: &[f64]) -> f64 {
    if rates.is_empty() || rates.iter().any(|&r| r <= 0.0) {
        return 0.0;
    }
    1.0 / rates.iter().map(|r| 1.0 / r).sum::<f64>()
}

fn single_uav(s: &Scenario) -> Result<()> {
    if s.uavs.len() != 1 {
        return Err(Error::Unsupported(format!("expected one UAV, got {}", s.uavs.len())));
    }
    Ok(())
}

fn rates_from(s: &Scenario, at: impl Fn(Vec2<f64>) -> Vec2<f64>) -> Vec<f64> {
    let u = &s.uavs[0];
    s.users
        .iter()
        .map(|user| {
            let g = los_gain(at(user.position), u.altitude, user.position, s.channel.beta0);
            link_rate(g, u.tx_power, s.channel.noise_power)
        })
        .collect()
}

/// UAV parked at the users' centroid with the optimal time split.
pub fn static_baseline(s: &Scenario) -> Result<f64> {
    single_uav(s)?;
    let c = centroid(&s.user_positions());
    Ok(water_level(&rates_from(s, |_| c)))
}

/// Every user served at its zenith rate for its share of the period, with
/// travel time ignored.
pub fn travel_free_upper_bound(s: &Scenario) -> Result<f64> {
    single_uav(s)?;
    Ok(water_level(&rates_from(s, |p| p)))
}
