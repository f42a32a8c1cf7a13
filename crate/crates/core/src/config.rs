//! Every tunable constant of a run, serializable as TOML.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{ControllerGains, ProfileMap};
use crate::dynamics::VehicleParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    /// Gaussian error on perceived gaps; off for reproducible baselines.
    pub noise: bool,
    /// Gap-noise standard deviation for a fully cautious observer (m).
    pub sigma0: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            noise: false,
            sigma0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Acceleration assumed for accelerate/decelerate directives, in g,
    /// clamped by the driver's own limit g_l(q).
    pub a_nom_g: f64,
    /// Look-ahead of the acceleration game as a multiple of T(q)...
    pub horizon_factor: f64,
    /// ...but never shorter than this (s).
    pub min_horizon: f64,
    /// Spacing of the look-ahead samples inside that horizon (s); 0 uses the
    /// full horizon only.
    pub horizon_step: f64,
    /// Floor on the look-ahead of the clear-insertion check (s), roughly the
    /// duration of one lane change.
    pub min_insertion_time: f64,
    /// A latched lane change completes once |e_lat| drops below this (m).
    pub latch_tolerance: f64,
    /// Utility margin a discretionary lane change must win by (m).
    pub hysteresis: f64,
    /// Deceleration used to size the end-of-lane guard, in g.
    pub guard_decel_g: f64,
    /// Aggressiveness assumed for the other player of a game.
    pub opponent_q: f64,
    /// Cruise speed of decision vehicles that start in the merge lane (km/h).
    pub merge_cruise_kmh: f64,
    /// Directives never push speed above this multiple of the cruise speed.
    pub max_speed_factor: f64,
    /// Nor below this multiple.
    pub min_speed_factor: f64,
    /// Minimum standstill gap kept to a leader (m).
    pub standstill_gap: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            a_nom_g: 0.3,
            horizon_factor: 3.0,
            min_horizon: 2.0,
            horizon_step: 0.5,
            min_insertion_time: 2.5,
            latch_tolerance: 0.2,
            hysteresis: 5.0,
            guard_decel_g: 0.3,
            opponent_q: 0.5,
            merge_cruise_kmh: 80.0,
            max_speed_factor: 1.35,
            min_speed_factor: 0.3,
            standstill_gap: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Decision period (s); a whole multiple of `dt`.
    pub epoch: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Quiet time required before a run counts as settled (s).
    pub settle_time: f64,
    pub vehicle: VehicleParams,
    pub profile: ProfileMap,
    pub gains: ControllerGains,
    pub perception: PerceptionConfig,
    pub planner: PlannerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            epoch: 0.1,
            t_max: 40.0,
            seed: 0,
            settle_time: 2.0,
            vehicle: VehicleParams::default(),
            profile: ProfileMap::default(),
            gains: ControllerGains::default(),
            perception: PerceptionConfig::default(),
            planner: PlannerConfig::default(),
        }
    }
}

impl SimConfig {
    /// Number of integration steps per decision epoch.
    pub fn epoch_steps(&self) -> usize {
        (self.epoch / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.epoch > 0.0 && self.epoch.is_finite()) {
            return Err(invalid("epoch", format!("must be positive, got {}", self.epoch)));
        }
        let ratio = self.epoch / self.dt;
        if ratio < 0.5 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(invalid(
                "epoch",
                format!("must be a whole multiple of dt ({} / {})", self.epoch, self.dt),
            ));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(invalid("t_max", format!("must be positive, got {}", self.t_max)));
        }
        if !(self.settle_time >= 0.0) {
            return Err(invalid("settle_time", "must be non-negative"));
        }
        self.vehicle
            .validate()
            .map_err(|e| invalid("vehicle", e.to_string()))?;
        let g = &self.gains;
        if [g.k_pg, g.k_dg, g.k_pl, g.k_dl].iter().any(|k| !(*k >= 0.0)) {
            return Err(invalid("gains", "PD gains must be non-negative"));
        }
        if !(g.g_pl >= 0.3 * crate::dynamics::GRAVITY) {
            return Err(invalid("gains.g_pl", "physical limit must be at least 0.3 g"));
        }
        if !(g.delta_pl > 0.0) {
            return Err(invalid("gains.delta_pl", "must be positive"));
        }
        if !(0.0..=1.0).contains(&g.velocity_weight) {
            return Err(invalid("gains.velocity_weight", "must be in [0, 1]"));
        }
        let m = &self.profile.magnification;
        for v in [m.cautious, m.aggressive] {
            if !(1.0..=1.3).contains(&v) {
                return Err(invalid("profile.magnification", "endpoints must lie in [1, 1.3]"));
            }
        }
        if self.profile.prediction_time.aggressive > self.profile.prediction_time.cautious {
            return Err(invalid(
                "profile.prediction_time",
                "must not increase with aggressiveness",
            ));
        }
        if self.profile.accel_limit_g.aggressive < self.profile.accel_limit_g.cautious {
            return Err(invalid(
                "profile.accel_limit_g",
                "must not decrease with aggressiveness",
            ));
        }
        if !(self.profile.visibility > 0.0) {
            return Err(invalid("profile.visibility", "must be positive"));
        }
        let p = &self.planner;
        if !(0.0..=1.0).contains(&p.opponent_q) {
            return Err(invalid("planner.opponent_q", "must be in [0, 1]"));
        }
        if !(p.a_nom_g > 0.0 && p.horizon_factor >= 0.0 && p.min_horizon >= 0.0 && p.horizon_step >= 0.0 && p.min_insertion_time >= 0.0 && p.latch_tolerance > 0.0) {
            return Err(invalid(
                "planner",
                "a_nom_g and latch_tolerance must be positive, horizon_factor, min_horizon, horizon_step and min_insertion_time non-negative",
            ));
        }
        if !(p.merge_cruise_kmh > 0.0 && p.max_speed_factor >= 1.0 && p.min_speed_factor >= 0.0) {
            return Err(invalid("planner", "speed bounds out of range"));
        }
        if !(self.perception.sigma0 >= 0.0) {
            return Err(invalid("perception.sigma0", "must be non-negative"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }
}
