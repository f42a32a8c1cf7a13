//! Driver disposition and the saturated PD controllers that turn errors into
//! acceleration and steering commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{VehicleParams, GRAVITY};

#[derive(Debug, Error, PartialEq)]
pub enum DriverError {
    #[error("aggressiveness q={0} outside [0, 1]")]
    QOutOfRange(f64),
}

/// A linear map over q∈[0,1], given by its values at q=0 and q=1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub cautious: f64,
    pub aggressive: f64,
}

impl LinearMap {
    pub const fn new(cautious: f64, aggressive: f64) -> Self {
        Self {
            cautious,
            aggressive,
        }
    }

    pub fn at(&self, q: f64) -> f64 {
        self.cautious + (self.aggressive - self.cautious) * q
    }
}

/// Endpoints of every q-dependent driver parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileMap {
    /// Visibility-range index α(q).
    pub alpha: LinearMap,
    /// Prediction time T(q) in seconds.
    pub prediction_time: LinearMap,
    /// Longitudinal acceleration limit in units of g.
    pub accel_limit_g: LinearMap,
    /// Lateral acceleration limit in units of g.
    pub lateral_accel_limit_g: LinearMap,
    /// Scale applied to other vehicles' rectangles when perceiving them.
    pub magnification: LinearMap,
    /// Visibility distance d_v in meters.
    pub visibility: f64,
    /// D_suf as a multiple of the vehicle diagonal.
    pub sufficient_distance_diagonals: f64,
    /// Braking limit relative to the acceleration limit.
    pub brake_factor: f64,
}

impl Default for ProfileMap {
    fn default() -> Self {
        Self {
            alpha: LinearMap::new(1.0, 0.3),
            prediction_time: LinearMap::new(2.2, 0.6),
            accel_limit_g: LinearMap::new(0.1, 0.3),
            lateral_accel_limit_g: LinearMap::new(0.1, 0.4),
            magnification: LinearMap::new(1.0, 1.3),
            visibility: 100.0,
            sufficient_distance_diagonals: 2.0,
            brake_factor: 1.0,
        }
    }
}

/// Behavioral parameters derived from an aggressiveness index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverProfile {
    pub q: f64,
    pub alpha: f64,
    /// T(q), seconds.
    pub prediction_time: f64,
    /// g_l, m/s².
    pub accel_limit: f64,
    /// a_yl, m/s².
    pub lateral_accel_limit: f64,
    pub magnification: f64,
    /// d_v, meters.
    pub visibility: f64,
    /// D_suf, meters.
    pub sufficient_distance: f64,
    pub brake_factor: f64,
}

impl DriverProfile {
    /// Headway beyond which more room adds no utility.
    pub fn headway_cap(&self) -> f64 {
        self.alpha * self.visibility
    }
}

pub fn profile_from_q(
    q: f64,
    map: &ProfileMap,
    params: &VehicleParams,
) -> Result<DriverProfile, DriverError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(DriverError::QOutOfRange(q));
    }
    Ok(DriverProfile {
        q,
        alpha: map.alpha.at(q),
        prediction_time: map.prediction_time.at(q),
        accel_limit: map.accel_limit_g.at(q) * GRAVITY,
        lateral_accel_limit: map.lateral_accel_limit_g.at(q) * GRAVITY,
        magnification: map.magnification.at(q),
        visibility: map.visibility,
        sufficient_distance: map.sufficient_distance_diagonals * params.diagonal(),
        brake_factor: map.brake_factor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    pub k_pg: f64,
    pub k_dg: f64,
    pub k_pl: f64,
    pub k_dl: f64,
    /// Physical acceleration limit, m/s².
    pub g_pl: f64,
    /// Physical steering limit, rad.
    pub delta_pl: f64,
    /// Weight of the velocity channel when a headway channel is active.
    pub velocity_weight: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_pg: 0.4,
            k_dg: 0.1,
            k_pl: 0.08,
            k_dl: 0.08,
            g_pl: 0.5 * GRAVITY,
            delta_pl: 30f64.to_radians(),
            velocity_weight: 0.5,
        }
    }
}

/// Tracking error and its rate for one control channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelError {
    pub error: f64,
    pub rate: f64,
}

/// Weighted mean of the velocity and headway channels.
///
/// The headway channel only ever tightens the command: a gap larger than the
/// reference cannot push the vehicle past its velocity reference.
pub fn blend_errors(
    velocity: ChannelError,
    headway: Option<ChannelError>,
    gains: &ControllerGains,
) -> ChannelError {
    match headway {
        None => velocity,
        Some(h) if h.error >= velocity.error => velocity,
        Some(h) => {
            let w = gains.velocity_weight;
            ChannelError {
                error: w * velocity.error + (1.0 - w) * h.error,
                rate: w * velocity.rate + (1.0 - w) * h.rate,
            }
        }
    }
}

/// Saturated PD acceleration command.
pub fn longitudinal_accel(
    profile: &DriverProfile,
    gains: &ControllerGains,
    e: f64,
    e_dot: f64,
) -> f64 {
    let raw = gains.k_pg * e + gains.k_dg * e_dot;
    let upper = profile.accel_limit.min(gains.g_pl);
    let lower = -(profile.accel_limit * profile.brake_factor).min(gains.g_pl);
    raw.min(upper).max(lower)
}

/// Steering angle that keeps lateral acceleration within `a_yl` at speed `v`.
///
/// Uses the steady-state lateral acceleration gain
/// `a_y/δ = v² / (57.3·L·g + K_us·v²)` (g per degree).
pub fn steering_limit(a_yl: f64, v: f64, params: &VehicleParams, delta_pl: f64) -> f64 {
    if v <= 0.0 {
        return delta_pl;
    }
    let gain = v * v / (57.3 * params.wheelbase() * GRAVITY + params.understeer_gradient * v * v);
    if gain <= 0.0 || !gain.is_finite() {
        return delta_pl;
    }
    let delta_deg = (a_yl / GRAVITY) / gain;
    delta_deg.to_radians().min(delta_pl)
}

/// Saturated PD steering command.
///
/// `e_lat` is the lateral position minus its reference; with the stiffness
/// sign convention of [`VehicleParams`] a positive angle turns the vehicle
/// toward smaller `x_lat`, so a positive error steers back onto the reference.
pub fn steering_command(
    profile: &DriverProfile,
    gains: &ControllerGains,
    e_lat: f64,
    e_lat_dot: f64,
    params: &VehicleParams,
    v: f64,
) -> f64 {
    let raw = gains.k_pl * e_lat + gains.k_dl * e_lat_dot;
    let limit = steering_limit(profile.lateral_accel_limit, v, params, gains.delta_pl)
        .min(gains.delta_pl);
    raw.clamp(-limit, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(q: f64) -> DriverProfile {
        profile_from_q(q, &ProfileMap::default(), &VehicleParams::default()).unwrap()
    }

    fn loose_gains() -> ControllerGains {
        ControllerGains {
            g_pl: 1e9,
            delta_pl: 1e9,
            ..ControllerGains::default()
        }
    }

    #[test]
    fn profile_endpoints() {
        assert_abs_diff_eq!(profile(1.0).magnification, 1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(profile(0.0).accel_limit, 0.1 * GRAVITY, epsilon = 1e-12);
        assert_abs_diff_eq!(profile(1.0).accel_limit, 0.3 * GRAVITY, epsilon = 1e-12);
        let mid = profile(0.5);
        assert_abs_diff_eq!(mid.magnification, 1.15, epsilon = 1e-12);
        assert_abs_diff_eq!(mid.prediction_time, (2.2 + 0.6) / 2.0, epsilon = 1e-12);
        let d = VehicleParams::default().diagonal();
        assert_abs_diff_eq!(mid.sufficient_distance, 2.0 * d, epsilon = 1e-12);
    }

    #[test]
    fn profile_rejects_out_of_range() {
        let map = ProfileMap::default();
        let p = VehicleParams::default();
        assert_eq!(
            profile_from_q(1.01, &map, &p),
            Err(DriverError::QOutOfRange(1.01))
        );
        assert!(profile_from_q(-0.1, &map, &p).is_err());
        assert!(profile_from_q(f64::NAN, &map, &p).is_err());
    }

    #[test]
    fn profile_monotone_over_sweep() {
        let mut prev = profile(0.0);
        for i in 1..=100 {
            let cur = profile(i as f64 / 100.0);
            assert!(cur.prediction_time <= prev.prediction_time);
            assert!(cur.accel_limit >= prev.accel_limit);
            assert!(cur.magnification >= prev.magnification);
            assert!((1.0..=1.3 + 1e-12).contains(&cur.magnification));
            assert!(cur.accel_limit >= 0.1 * GRAVITY - 1e-12);
            assert!(cur.accel_limit <= 0.3 * GRAVITY + 1e-12);
            prev = cur;
        }
    }

    #[test]
    fn longitudinal_examples() {
        let p0 = profile(0.0);
        let g = ControllerGains::default();
        assert_eq!(longitudinal_accel(&p0, &g, 0.0, 0.0), 0.0);
        // PD output of 5 m/s² is cut to the cautious comfort limit.
        let gains = ControllerGains { k_pg: 1.0, k_dg: 0.0, ..g };
        assert_abs_diff_eq!(
            longitudinal_accel(&p0, &gains, 5.0, 0.0),
            0.1 * GRAVITY,
            epsilon = 1e-12
        );
        let mut big = profile(1.0);
        big.accel_limit = 1e9;
        let gains = ControllerGains {
            k_pg: 0.5,
            ..loose_gains()
        };
        assert_abs_diff_eq!(longitudinal_accel(&big, &gains, 2.0, 0.0), 1.0, epsilon = 1e-12);
        // braking is clamped symmetrically
        assert_abs_diff_eq!(
            longitudinal_accel(&p0, &ControllerGains { k_pg: 1.0, ..g }, -5.0, 0.0),
            -0.1 * GRAVITY,
            epsilon = 1e-12
        );
    }

    #[test]
    fn blend_uses_headway_only_when_tighter() {
        let g = ControllerGains::default();
        let v = ChannelError { error: 2.0, rate: 0.0 };
        let far = ChannelError { error: 50.0, rate: 1.0 };
        assert_eq!(blend_errors(v, Some(far), &g), v);
        let near = ChannelError { error: -4.0, rate: -2.0 };
        let b = blend_errors(v, Some(near), &g);
        assert_abs_diff_eq!(b.error, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.rate, -1.0, epsilon = 1e-12);
        assert_eq!(blend_errors(v, None, &g), v);
    }

    #[test]
    fn steering_limit_reference_value() {
        let params = VehicleParams {
            lf: 1.2,
            lr: 1.5,
            understeer_gradient: 0.0,
            ..VehicleParams::default()
        };
        let delta = steering_limit(0.3 * GRAVITY, 20.0, &params, 1.0);
        // gain = 400 / (57.3·2.7·9.81) g/deg
        let gain = 400.0 / (57.3 * 2.7 * 9.81);
        assert_abs_diff_eq!(gain, 0.26355, epsilon = 1e-5);
        assert_abs_diff_eq!(delta.to_degrees(), 1.1383, epsilon = 1e-4);
        assert_abs_diff_eq!(delta, 0.01987, epsilon = 1e-5);
    }

    #[test]
    fn steering_limit_at_standstill_is_physical_limit() {
        let params = VehicleParams::default();
        assert_eq!(steering_limit(3.0, 0.0, &params, 0.5), 0.5);
        assert_eq!(steering_limit(3.0, 1e-6, &params, 0.5), 0.5);
    }

    #[test]
    fn steering_limit_grows_with_understeer() {
        let mut prev = 0.0;
        for k in 0..10 {
            let params = VehicleParams {
                understeer_gradient: k as f64 * 0.5,
                ..VehicleParams::default()
            };
            let d = steering_limit(2.0, 25.0, &params, 10.0);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn steering_examples() {
        let params = VehicleParams::default();
        let p = profile(0.5);
        let g = ControllerGains::default();
        assert_eq!(steering_command(&p, &g, 0.0, 0.0, &params, 20.0), 0.0);
        let limit = steering_limit(p.lateral_accel_limit, 20.0, &params, g.delta_pl);
        assert_eq!(steering_command(&p, &g, 100.0, 0.0, &params, 20.0), limit);
        assert_eq!(steering_command(&p, &g, -100.0, 0.0, &params, 20.0), -limit);

        let mut wide = p;
        wide.lateral_accel_limit = 1e9;
        let gains = ControllerGains {
            k_pl: 0.05,
            ..loose_gains()
        };
        assert_abs_diff_eq!(
            steering_command(&wide, &gains, 1.0, 0.0, &params, 20.0),
            0.05,
            epsilon = 1e-12
        );
    }
}
