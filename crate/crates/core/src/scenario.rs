//! Problem description: ground users, UAVs, channel constants, time grid and
//! propulsion model, plus the TOML configuration format.
//!
//! Everything is stored in SI linear units. Decibel quantities only appear at
//! the configuration boundary, behind explicit unit suffixes
//! (`noise_power_dbm`, `beta0_db`, `tx_power_dbm`).
//!
//! ```toml
//! [[users]]
//! id = "gu1"
//! x_m = -1000.0
//! y_m = 0.0
//!
//! [[uavs]]
//! id = "uav1"
//! altitude_m = 100.0
//! v_max_mps = 50.0
//! v_min_mps = 0.0          # optional, default 0
//! a_max_mps2 = 5.0         # optional, default unbounded
//! tx_power_w = 0.1         # or tx_power_dbm
//! energy_budget_j = 13000  # optional
//!
//! [channel]
//! noise_power_dbm = -110.0 # or noise_power_w
//! beta0_db = -50.0         # or beta0_linear
//!
//! [grid]
//! period_s = 100.0
//! slot_count = 200         # optional, see `default_slot_count`
//!
//! [energy]                 # optional, default kind = "none"
//! kind = "fixed-wing"
//! c1 = 9.26e-4
//! c2 = 2250.0
//! ```

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Vec2};

/// `10^(db/10)`.
pub fn db_to_linear<T: Scalar>(value_db: T) -> T {
    T::lit(10.0).powf(value_db / T::lit(10.0))
}

pub fn linear_to_db<T: Scalar>(value: T) -> T {
    T::lit(10.0) * value.log10()
}

/// dBm to watts.
pub fn dbm_to_watts<T: Scalar>(value_dbm: T) -> T {
    db_to_linear(value_dbm - T::lit(30.0))
}

/// Slot count used when the config omits `grid.slot_count`: 200 slots up to
/// T = 120 s, then enough slots to keep the slot length at or below 0.6 s.
pub fn default_slot_count(period: f64) -> usize {
    if period <= 120.0 {
        200
    } else {
        (period / 0.6).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub id: String,
    pub position: Vec2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub id: String,
    /// H, meters.
    pub altitude: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    /// Maximum transmit power, watts.
    pub tx_power: f64,
    /// Propulsion energy budget E_max, joules.
    pub energy_budget: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Linear power gain at the 1 m reference distance.
    pub beta0: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub period: f64,
    pub slot_count: usize,
}

impl TimeGrid {
    pub fn new(period: f64, slot_count: usize) -> Self {
        Self { period, slot_count }
    }

    /// δ = T / N.
    pub fn slot_len(&self) -> f64 {
        self.period / self.slot_count as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotaryWingParams {
    pub blade_profile_power: f64,
    pub induced_power: f64,
    pub tip_speed: f64,
    pub induced_velocity: f64,
    pub parasite_coeff: f64,
}

impl Default for RotaryWingParams {
    /// Placeholder airframe used for curve-shape checks; these are not
    /// calibrated to any particular vehicle.
    fn default() -> Self {
        Self {
            blade_profile_power: 79.86,
            induced_power: 88.63,
            tip_speed: 120.0,
            induced_velocity: 4.03,
            parasite_coeff: 0.018,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnergyModelParams {
    None,
    FixedWing { c1: f64, c2: f64 },
    RotaryWing(RotaryWingParams),
}

impl EnergyModelParams {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::FixedWing { .. } => "fixed-wing",
            Self::RotaryWing(_) => "rotary-wing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: Vec<UserSpec>,
    pub uavs: Vec<UavSpec>,
    pub channel: ChannelParams,
    pub grid: TimeGrid,
    pub energy: EnergyModelParams,
}

impl Scenario {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn uav_count(&self) -> usize {
        self.uavs.len()
    }

    pub fn user_positions(&self) -> Vec<Vec2<f64>> {
        self.users.iter().map(|u| u.position).collect()
    }

    /// Reference SNR `P·β0/σ²` of UAV `m` at full power.
    pub fn reference_snr(&self, m: usize) -> f64 {
        self.uavs[m].tx_power * self.channel.beta0 / self.channel.noise_power
    }

    /// Reference two-user setup: users 2000 m apart, one UAV at 100 m,
    /// V_max = 50 m/s, P = 0.1 W, β0 = -50 dB, σ² = -110 dBm.
    pub fn two_user_reference(period: f64, slot_count: usize) -> Self {
        Self {
            users: vec![
                UserSpec {
                    id: "gu1".into(),
                    position: Vec2::new(-1000.0, 0.0),
                },
                UserSpec {
                    id: "gu2".into(),
                    position: Vec2::new(1000.0, 0.0),
                },
            ],
            uavs: vec![UavSpec {
                id: "uav1".into(),
                altitude: 100.0,
                v_max: 50.0,
                v_min: 0.0,
                a_max: f64::INFINITY,
                tx_power: 0.1,
                energy_budget: None,
            }],
            channel: ChannelParams {
                beta0: db_to_linear(-50.0),
                noise_power: dbm_to_watts(-110.0),
            },
            grid: TimeGrid::new(period, slot_count),
            energy: EnergyModelParams::None,
        }
    }

    /// The fixed-wing variant used for the energy-constrained problem.
    pub fn two_user_fixed_wing(period: f64, slot_count: usize, energy_budget: f64) -> Self {
        let mut s = Self::two_user_reference(period, slot_count);
        let uav = &mut s.uavs[0];
        uav.v_min = 5.0;
        uav.a_max = 5.0;
        uav.energy_budget = Some(energy_budget);
        s.energy = EnergyModelParams::FixedWing {
            c1: 9.26e-4,
            c2: 2250.0,
        };
        s
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(render_scenario(self).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Every violated invariant, each prefixed with its field path.
pub fn validate_scenario(s: &Scenario) -> Vec<String> {
    let mut out = Vec::new();
    if s.users.is_empty() {
        out.push("users must be non-empty".to_string());
    }
    if s.uavs.is_empty() {
        out.push("uavs must be non-empty".to_string());
    }
    let mut seen = HashSet::new();
    for (i, u) in s.users.iter().enumerate() {
        if !u.position.is_finite() {
            out.push(format!("users[{i}].position must be finite"));
        }
        if !seen.insert(u.id.as_str()) {
            out.push(format!("users[{i}].id '{}' is not unique", u.id));
        }
    }
    let mut seen = HashSet::new();
    for (i, u) in s.uavs.iter().enumerate() {
        if !seen.insert(u.id.as_str()) {
            out.push(format!("uavs[{i}].id '{}' is not unique", u.id));
        }
        if !(u.altitude > 0.0 && u.altitude.is_finite()) {
            out.push(format!("uavs[{i}].altitude must be > 0"));
        }
        if !(u.v_min >= 0.0) {
            out.push(format!("uavs[{i}].v_min must be >= 0"));
        }
        if !(u.v_max.is_finite() && u.v_max >= 0.0) {
            out.push(format!("uavs[{i}].v_max must be finite and >= 0"));
        }
        if u.v_min > u.v_max {
            out.push(format!(
                "uavs[{i}].v_min ({}) must be <= uavs[{i}].v_max ({})",
                u.v_min, u.v_max
            ));
        }
        if !(u.a_max >= 0.0) {
            out.push(format!("uavs[{i}].a_max must be >= 0"));
        }
        if !(u.tx_power > 0.0 && u.tx_power.is_finite()) {
            out.push(format!("uavs[{i}].tx_power must be > 0"));
        }
        if let Some(e) = u.energy_budget {
            if !(e > 0.0 && e.is_finite()) {
                out.push(format!("uavs[{i}].energy_budget must be > 0"));
            }
        }
    }
    if !(s.channel.beta0 > 0.0 && s.channel.beta0.is_finite()) {
        out.push("channel.beta0 must be > 0".to_string());
    }
    if !(s.channel.noise_power > 0.0 && s.channel.noise_power.is_finite()) {
        out.push("channel.noise_power must be > 0".to_string());
    }
    if !(s.grid.period > 0.0 && s.grid.period.is_finite()) {
        out.push("grid.period must be > 0".to_string());
    }
    if s.grid.slot_count < 2 {
        out.push("grid.slot_count must be ≥ 2".to_string());
    }
    match s.energy {
        EnergyModelParams::None => {}
        EnergyModelParams::FixedWing { c1, c2 } => {
            if !(c1 > 0.0 && c1.is_finite()) {
                out.push("energy.c1 must be > 0".to_string());
            }
            if !(c2 > 0.0 && c2.is_finite()) {
                out.push("energy.c2 must be > 0".to_string());
            }
        }
        EnergyModelParams::RotaryWing(p) => {
            for (name, v) in [
                ("blade_profile_power", p.blade_profile_power),
                ("induced_power", p.induced_power),
                ("tip_speed", p.tip_speed),
                ("induced_velocity", p.induced_velocity),
                ("parasite_coeff", p.parasite_coeff),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(format!("energy.{name} must be > 0"));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Configuration file format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    users: Vec<RawUser>,
    uavs: Vec<RawUav>,
    channel: RawChannel,
    grid: RawGrid,
    #[serde(default)]
    energy: Option<RawEnergy>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    id: String,
    x_m: f64,
    y_m: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUav {
    id: String,
    altitude_m: f64,
    v_max_mps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v_min_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a_max_mps2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy_budget_j: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta0_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta0_linear: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    period_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slot_count: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blade_profile_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    induced_power_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tip_speed_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    induced_velocity_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parasite_coeff: Option<f64>,
}

fn exactly_one(
    errors: &mut Vec<String>,
    path: &str,
    linear: (&str, Option<f64>),
    log: (&str, Option<f64>),
    log_to_linear: fn(f64) -> f64,
) -> f64 {
    match (linear.1, log.1) {
        (Some(v), None) => v,
        (None, Some(v)) => log_to_linear(v),
        (Some(_), Some(_)) => {
            errors.push(format!(
                "{path}: give only one of {} and {}",
                linear.0, log.0
            ));
            f64::NAN
        }
        (None, None) => {
            errors.push(format!("{path}: missing {} (or {})", log.0, linear.0));
            f64::NAN
        }
    }
}

/// Read, parse and validate a scenario file.
pub fn load_scenario_file(path: &std::path::Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_scenario(&text)
}

/// Parse and validate a scenario configuration.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    let value: toml::Value = config_text
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    let raw: RawConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Schema(vec![e.message().to_string()]))?;

    let mut errors = Vec::new();
    let users = raw
        .users
        .into_iter()
        .map(|u| UserSpec {
            id: u.id,
            position: Vec2::new(u.x_m, u.y_m),
        })
        .collect();
    let uavs = raw
        .uavs
        .into_iter()
        .enumerate()
        .map(|(i, u)| UavSpec {
            tx_power: exactly_one(
                &mut errors,
                &format!("uavs[{i}]"),
                ("tx_power_w", u.tx_power_w),
                ("tx_power_dbm", u.tx_power_dbm),
                dbm_to_watts,
            ),
            id: u.id,
            altitude: u.altitude_m,
            v_max: u.v_max_mps,
            v_min: u.v_min_mps.unwrap_or(0.0),
            a_max: u.a_max_mps2.unwrap_or(f64::INFINITY),
            energy_budget: u.energy_budget_j,
        })
        .collect();
    let channel = ChannelParams {
        noise_power: exactly_one(
            &mut errors,
            "channel",
            ("noise_power_w", raw.channel.noise_power_w),
            ("noise_power_dbm", raw.channel.noise_power_dbm),
            dbm_to_watts,
        ),
        beta0: exactly_one(
            &mut errors,
            "channel",
            ("beta0_linear", raw.channel.beta0_linear),
            ("beta0_db", raw.channel.beta0_db),
            db_to_linear,
        ),
    };
    let grid = TimeGrid::new(
        raw.grid.period_s,
        raw.grid
            .slot_count
            .unwrap_or_else(|| default_slot_count(raw.grid.period_s)),
    );
    let energy = match raw.energy {
        None => EnergyModelParams::None,
        Some(e) => parse_energy(e, &mut errors),
    };
    if !errors.is_empty() {
        return Err(Error::Schema(errors));
    }
    let s = Scenario {
        users,
        uavs,
        channel,
        grid,
        energy,
    };
    let violations = validate_scenario(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        Err(Error::Schema(violations))
    }
}

fn parse_energy(e: RawEnergy, errors: &mut Vec<String>) -> EnergyModelParams {
    let mut need = |name: &str, v: Option<f64>| {
        v.unwrap_or_else(|| {
            errors.push(format!("energy: missing {name} for kind '{}'", e.kind));
            f64::NAN
        })
    };
    match e.kind.as_str() {
        "none" => EnergyModelParams::None,
        "fixed-wing" => EnergyModelParams::FixedWing {
            c1: need("c1", e.c1),
            c2: need("c2", e.c2),
        },
        "rotary-wing" => {
            let d = RotaryWingParams::default();
            EnergyModelParams::RotaryWing(RotaryWingParams {
                blade_profile_power: e.blade_profile_power_w.unwrap_or(d.blade_profile_power),
                induced_power: e.induced_power_w.unwrap_or(d.induced_power),
                tip_speed: e.tip_speed_mps.unwrap_or(d.tip_speed),
                induced_velocity: e.induced_velocity_mps.unwrap_or(d.induced_velocity),
                parasite_coeff: e.parasite_coeff.unwrap_or(d.parasite_coeff),
            })
        }
        other => {
            errors.push(format!(
                "energy.kind: unknown model '{other}' (expected none, fixed-wing or rotary-wing)"
            ));
            EnergyModelParams::None
        }
    }
}

/// Canonical TOML rendering. Uses the linear-unit keys so that
/// `load_scenario(&render_scenario(s)) == s` holds bit for bit.
pub fn render_scenario(s: &Scenario) -> String {
    let raw = RawConfig {
        users: s
            .users
            .iter()
            .map(|u| RawUser {
                id: u.id.clone(),
                x_m: u.position.x,
                y_m: u.position.y,
            })
            .collect(),
        uavs: s
            .uavs
            .iter()
            .map(|u| RawUav {
                id: u.id.clone(),
                altitude_m: u.altitude,
                v_max_mps: u.v_max,
                v_min_mps: Some(u.v_min),
                a_max_mps2: u.a_max.is_finite().then_some(u.a_max),
                tx_power_w: Some(u.tx_power),
                tx_power_dbm: None,
                energy_budget_j: u.energy_budget,
            })
            .collect(),
        channel: RawChannel {
            noise_power_dbm: None,
            noise_power_w: Some(s.channel.noise_power),
            beta0_db: None,
            beta0_linear: Some(s.channel.beta0),
        },
        grid: RawGrid {
            period_s: s.grid.period,
            slot_count: Some(s.grid.slot_count),
        },
        energy: Some(match s.energy {
            EnergyModelParams::None => RawEnergy::kind("none"),
            EnergyModelParams::FixedWing { c1, c2 } => RawEnergy {
                c1: Some(c1),
                c2: Some(c2),
                ..RawEnergy::kind("fixed-wing")
            },
            EnergyModelParams::RotaryWing(p) => RawEnergy {
                blade_profile_power_w: Some(p.blade_profile_power),
                induced_power_w: Some(p.induced_power),
                tip_speed_mps: Some(p.tip_speed),
                induced_velocity_mps: Some(p.induced_velocity),
                parasite_coeff: Some(p.parasite_coeff),
                ..RawEnergy::kind("rotary-wing")
            },
        }),
    };
    toml::to_string(&raw).expect("scenario renders to TOML")
}

impl RawEnergy {
    fn kind(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            c1: None,
            c2: None,
            blade_profile_power_w: None,
            induced_power_w: None,
            tip_speed_mps: None,
            induced_velocity_mps: None,
            parasite_coeff: None,
        }
    }
}
