//! Planar two-wheel vehicle model.
//!
//! Lateral velocity and yaw rate follow the linear bicycle model; the pose is
//! integrated from the speed magnitude along the heading. Positions use the
//! road frame: `y_long` runs along the direction of travel and `x_lat` across
//! it. `theta` is measured from the road axis, so `theta == 0` is straight
//! ahead and a positive heading moves the vehicle toward larger `x_lat`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Below this longitudinal speed the lateral model is not evaluated.
pub const LOW_SPEED_LIMIT: f64 = 0.1;

/// Nominal highway speed used for the plant stability check (80 km/h).
pub const NOMINAL_SPEED: f64 = 22.2;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite control input (accel={accel}, steer={steer})")]
    NonFiniteControls { accel: f64, steer: f64 },
    #[error("negative time step {0}")]
    NegativeStep(f64),
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x_lat: f64,
    pub y_long: f64,
    pub theta: f64,
    pub v_long: f64,
    pub v_lat: f64,
    /// Yaw rate.
    pub r: f64,
}

impl VehicleState {
    /// A vehicle travelling straight down the road at `speed`.
    pub fn cruising(x_lat: f64, y_long: f64, speed: f64) -> Self {
        Self {
            x_lat,
            y_long,
            v_long: speed,
            ..Self::default()
        }
    }

    pub fn speed(&self) -> f64 {
        self.v_long.hypot(self.v_lat)
    }

    pub fn is_finite(&self) -> bool {
        [self.x_lat, self.y_long, self.theta, self.v_long, self.v_lat, self.r]
            .iter()
            .all(|v| v.is_finite())
    }

    fn to_array(self) -> [f64; 6] {
        [self.x_lat, self.y_long, self.theta, self.v_long, self.v_lat, self.r]
    }

    fn from_array(a: [f64; 6]) -> Self {
        Self {
            x_lat: a[0],
            y_long: a[1],
            theta: a[2],
            v_long: a[3],
            v_lat: a[4],
            r: a[5],
        }
    }
}

/// Chassis and tire parameters.
///
/// Cornering stiffnesses are stored with the sign that makes the lateral
/// matrix stable as written, i.e. negative for an ordinary car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub mass: f64,
    pub yaw_inertia: f64,
    pub lf: f64,
    pub lr: f64,
    pub c_af: f64,
    pub c_ar: f64,
    /// Understeer gradient in deg/g.
    pub understeer_gradient: f64,
    pub width: f64,
    pub length: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            lf: 1.2,
            lr: 1.6,
            c_af: -60_000.0,
            c_ar: -60_000.0,
            understeer_gradient: 2.0,
            width: 1.8,
            length: 4.5,
        }
    }
}

impl VehicleParams {
    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.length)
    }

    /// State matrix and input column of the lateral model at `v_long`.
    pub fn lateral_system(&self, v_long: f64) -> ([[f64; 2]; 2], [f64; 2]) {
        let (m, iz, lf, lr, cf, cr) = (
            self.mass,
            self.yaw_inertia,
            self.lf,
            self.lr,
            self.c_af,
            self.c_ar,
        );
        let a = [
            [
                (cf + cr) / (m * v_long),
                (-lf * cf + lr * cr) / (m * v_long) - v_long,
            ],
            [
                (lf * cf - lr * cr) / (iz * v_long),
                (-lf * lf * cf + lr * lr * cr) / (iz * v_long),
            ],
        ];
        let b = [cf / m, lf * cf / iz];
        (a, b)
    }

    /// Both eigenvalues of the lateral matrix have negative real part.
    pub fn is_stable_at(&self, v_long: f64) -> bool {
        let (a, _) = self.lateral_system(v_long);
        let trace = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        trace < 0.0 && det > 0.0
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("mass", self.mass),
            ("yaw_inertia", self.yaw_inertia),
            ("lf", self.lf),
            ("lr", self.lr),
            ("width", self.width),
            ("length", self.length),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.c_af.is_finite() && self.c_ar.is_finite() && self.understeer_gradient.is_finite())
        {
            return Err(DynamicsError::InvalidParams(
                "stiffness and understeer gradient must be finite".into(),
            ));
        }
        if !self.is_stable_at(NOMINAL_SPEED) {
            return Err(DynamicsError::InvalidParams(format!(
                "lateral dynamics unstable at {NOMINAL_SPEED} m/s"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Controls {
    /// Longitudinal acceleration (m/s²).
    pub accel: f64,
    /// Steering angle (rad).
    pub steer: f64,
}

/// Rates of lateral velocity and yaw rate.
///
/// Returns zeros when `v_long <= LOW_SPEED_LIMIT`; the model divides by the
/// longitudinal speed and is meaningless near standstill.
pub fn lateral_derivative(state: &VehicleState, params: &VehicleParams, delta: f64) -> (f64, f64) {
    if state.v_long <= LOW_SPEED_LIMIT {
        return (0.0, 0.0);
    }
    let (a, b) = params.lateral_system(state.v_long);
    (
        a[0][0] * state.v_lat + a[0][1] * state.r + b[0] * delta,
        a[1][0] * state.v_lat + a[1][1] * state.r + b[1] * delta,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRate {
    pub d_long: f64,
    pub d_lat: f64,
    pub d_theta: f64,
}

pub fn pose_derivative(state: &VehicleState) -> PoseRate {
    let v = state.speed();
    let (sin, cos) = state.theta.sin_cos();
    PoseRate {
        d_long: v * cos,
        d_lat: v * sin,
        d_theta: state.r,
    }
}

fn derivative(state: &VehicleState, params: &VehicleParams, controls: &Controls) -> [f64; 6] {
    let pose = pose_derivative(state);
    let (dv_lat, dr) = lateral_derivative(state, params, controls.steer);
    [pose.d_lat, pose.d_long, pose.d_theta, controls.accel, dv_lat, dr]
}

/// Advances one fixed step with the classical fourth-order Runge-Kutta scheme.
///
/// Controls are held constant across the step. The longitudinal speed is
/// floored at zero afterwards.
pub fn step(
    state: &VehicleState,
    params: &VehicleParams,
    controls: &Controls,
    dt: f64,
) -> Result<VehicleState, DynamicsError> {
    if !(controls.accel.is_finite() && controls.steer.is_finite()) {
        return Err(DynamicsError::NonFiniteControls {
            accel: controls.accel,
            steer: controls.steer,
        });
    }
    if dt < 0.0 || dt.is_nan() {
        return Err(DynamicsError::NegativeStep(dt));
    }
    if dt == 0.0 {
        return Ok(*state);
    }

    let y0 = state.to_array();
    let offset = |k: &[f64; 6], h: f64| {
        let mut out = y0;
        for (o, ki) in out.iter_mut().zip(k) {
            *o += h * ki;
        }
        VehicleState::from_array(out)
    };
    let k1 = derivative(state, params, controls);
    let k2 = derivative(&offset(&k1, dt / 2.0), params, controls);
    let k3 = derivative(&offset(&k2, dt / 2.0), params, controls);
    let k4 = derivative(&offset(&k3, dt), params, controls);

    let mut next = y0;
    for i in 0..6 {
        next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let mut next = VehicleState::from_array(next);
    if next.v_long < 0.0 {
        next.v_long = 0.0;
    }
    Ok(next)
}
