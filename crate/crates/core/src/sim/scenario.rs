//! Scenario definitions: road geometry plus initial vehicle placement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, LaneGeometry};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("scenario serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("vehicles[{index}].x0_m: {x0} is not on a lane center")]
    OffLane { index: usize, x0: f64 },
    #[error("vehicles[{index}].id: duplicate id {id}")]
    DuplicateId { index: usize, id: u32 },
    #[error("vehicles[{index}].v0_kmh: must be positive, got {v0}")]
    NonPositiveSpeed { index: usize, v0: f64 },
    #[error("vehicles[{index}].y0_m: must be finite")]
    NonFinitePosition { index: usize },
    #[error("vehicles[{index}].q: must be in [0, 1], got {q}")]
    QOutOfRange { index: usize, q: f64 },
    #[error("no vehicle named or numbered {0:?}")]
    UnknownVehicle(String),
    #[error("vehicle {0:?} is scripted; only decision vehicles take an aggressiveness")]
    ScriptedOverride(String),
    #[error("unknown built-in scenario {0:?} (expected scenario1 or scenario2)")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    /// Holds its preset speed and lane.
    Scripted,
    /// Driven by the lane games.
    Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioVehicle {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub x0_m: f64,
    pub y0_m: f64,
    pub v0_kmh: f64,
    pub kind: VehicleKind,
    /// Aggressiveness; decision vehicles without one are nominal (0.5).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

impl ScenarioVehicle {
    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| format!("vehicle{}", self.id))
    }

    pub fn q_or_nominal(&self) -> f64 {
        self.q.unwrap_or(NOMINAL_Q)
    }
}

/// Default aggressiveness of a decision vehicle with no explicit `q`.
pub const NOMINAL_Q: f64 = 0.5;

/// Id of the merging vehicle in the built-in scenarios.
pub const MERGING_ID: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDef {
    pub geometry: LaneGeometry,
    #[serde(default)]
    pub vehicles: Vec<ScenarioVehicle>,
}

fn vehicle(id: u32, x0: f64, y0: f64, v0_kmh: f64) -> ScenarioVehicle {
    ScenarioVehicle {
        id,
        name: None,
        x0_m: x0,
        y0_m: y0,
        v0_kmh,
        kind: VehicleKind::Scripted,
        q: None,
    }
}

fn merging(x0: f64, y0: f64) -> ScenarioVehicle {
    ScenarioVehicle {
        name: Some("merging".into()),
        kind: VehicleKind::Decision,
        q: Some(NOMINAL_Q),
        ..vehicle(MERGING_ID, x0, y0, 70.0)
    }
}

impl ScenarioDef {
    /// Five mainline vehicles at 80 km/h; the merging vehicle starts beside
    /// the gap between Vehicles 3 and 4.
    pub fn scenario1() -> Self {
        Self {
            geometry: LaneGeometry::highway_merge(),
            vehicles: vec![
                vehicle(1, 0.0, 30.0, 80.0),
                vehicle(2, 3.3, 30.0, 80.0),
                vehicle(3, 6.6, 30.0, 80.0),
                vehicle(4, 6.6, 5.0, 80.0),
                vehicle(5, 6.6, -10.0, 80.0),
                merging(9.9, 10.0),
            ],
        }
    }

    /// Vehicles 1–3 abreast at y = 10; the merging vehicle starts at y = 0.
    pub fn scenario2() -> Self {
        Self {
            geometry: LaneGeometry::highway_merge(),
            vehicles: vec![
                vehicle(1, 0.0, 10.0, 80.0),
                vehicle(2, 3.3, 10.0, 80.0),
                vehicle(3, 6.6, 10.0, 80.0),
                vehicle(4, 6.6, 5.0, 80.0),
                vehicle(5, 6.6, -10.0, 80.0),
                merging(9.9, 0.0),
            ],
        }
    }

    pub fn builtin(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "scenario1" => Ok(Self::scenario1()),
            "scenario2" => Ok(Self::scenario2()),
            other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let def: ScenarioDef = toml::from_str(text)?;
        def.validate()?;
        Ok(def)
    }

    pub fn to_toml(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.geometry.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for (index, v) in self.vehicles.iter().enumerate() {
            if !seen.insert(v.id) {
                return Err(ScenarioError::DuplicateId { index, id: v.id });
            }
            if !self
                .geometry
                .lane_centers
                .iter()
                .any(|c| (c - v.x0_m).abs() < 1e-6)
            {
                return Err(ScenarioError::OffLane { index, x0: v.x0_m });
            }
            if !(v.v0_kmh > 0.0 && v.v0_kmh.is_finite()) {
                return Err(ScenarioError::NonPositiveSpeed { index, v0: v.v0_kmh });
            }
            if !v.y0_m.is_finite() {
                return Err(ScenarioError::NonFinitePosition { index });
            }
            if let Some(q) = v.q {
                if !(0.0..=1.0).contains(&q) {
                    return Err(ScenarioError::QOutOfRange { index, q });
                }
            }
        }
        Ok(())
    }

    /// Index of the vehicle matching `key`, either its name or its numeric id.
    pub fn find(&self, key: &str) -> Option<usize> {
        self.vehicles
            .iter()
            .position(|v| v.name.as_deref() == Some(key))
            .or_else(|| {
                let id: u32 = key.parse().ok()?;
                self.vehicles.iter().position(|v| v.id == id)
            })
    }

    /// Sets the aggressiveness of the decision vehicle matching `key`.
    pub fn set_q(&mut self, key: &str, q: f64) -> Result<(), ScenarioError> {
        let index = self
            .find(key)
            .ok_or_else(|| ScenarioError::UnknownVehicle(key.to_string()))?;
        if !(0.0..=1.0).contains(&q) {
            return Err(ScenarioError::QOutOfRange { index, q });
        }
        let v = &mut self.vehicles[index];
        if v.kind != VehicleKind::Decision {
            return Err(ScenarioError::ScriptedOverride(key.to_string()));
        }
        v.q = Some(q);
        Ok(())
    }

    /// Turns vehicle `id` into a decision vehicle of aggressiveness `q`.
    pub fn promote(&mut self, id: u32, q: f64) -> Result<(), ScenarioError> {
        let index = self
            .vehicles
            .iter()
            .position(|v| v.id == id)
            .ok_or_else(|| ScenarioError::UnknownVehicle(id.to_string()))?;
        if !(0.0..=1.0).contains(&q) {
            return Err(ScenarioError::QOutOfRange { index, q });
        }
        let v = &mut self.vehicles[index];
        v.kind = VehicleKind::Decision;
        v.q = Some(q);
        Ok(())
    }
}
