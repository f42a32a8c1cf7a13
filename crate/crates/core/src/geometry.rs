//! Straight multi-lane road with a merge lane on the outer side.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("lane centers must be non-empty and strictly increasing")]
    LaneCenters,
    #[error("lane width must be positive, got {0}")]
    LaneWidth(f64),
    #[error("merge entrance length must be positive, got {0}")]
    EntranceLength(f64),
    #[error("merge extension must be non-negative, got {0}")]
    Extension(f64),
    #[error("x_lat={0} is not in the merge lane")]
    NotInMergeLane(f64),
}

/// Index into [`LaneGeometry::lane_centers`]. Lane 0 is the innermost lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LaneId(pub usize);

impl LaneId {
    /// One-based lane number as printed in logs.
    pub fn number(self) -> usize {
        self.0 + 1
    }

    /// The adjacent lane on the inner ("left") side.
    pub fn left(self) -> Option<LaneId> {
        self.0.checked_sub(1).map(LaneId)
    }
}

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeZone {
    /// Longitudinal position where merging becomes possible.
    pub start: f64,
    pub entrance_length: f64,
    /// Grace region past the entrance where a started merge may finish.
    pub extension: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneGeometry {
    /// Lateral lane centers, strictly increasing. The last lane is the merge lane.
    pub lane_centers: Vec<f64>,
    pub lane_width: f64,
    pub merge: MergeZone,
}

/// Midpoints closer than this count as exact ties.
const MIDPOINT_TOLERANCE: f64 = 1e-9;

impl LaneGeometry {
    /// Three mainline lanes at 0, 3.3 and 6.6 m with the merge lane at 9.9 m.
    pub fn highway_merge() -> Self {
        Self {
            lane_centers: vec![0.0, 3.3, 6.6, 9.9],
            lane_width: 3.3,
            merge: MergeZone {
                start: 50.0,
                entrance_length: 100.0,
                extension: 20.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.lane_centers.is_empty()
            || self.lane_centers.iter().any(|c| !c.is_finite())
            || self.lane_centers.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(GeometryError::LaneCenters);
        }
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return Err(GeometryError::LaneWidth(self.lane_width));
        }
        if !(self.merge.entrance_length > 0.0 && self.merge.entrance_length.is_finite()) {
            return Err(GeometryError::EntranceLength(self.merge.entrance_length));
        }
        if !(self.merge.extension >= 0.0 && self.merge.extension.is_finite()) {
            return Err(GeometryError::Extension(self.merge.extension));
        }
        Ok(())
    }

    pub fn lane_count(&self) -> usize {
        self.lane_centers.len()
    }

    pub fn merge_lane(&self) -> LaneId {
        LaneId(self.lane_centers.len() - 1)
    }

    pub fn is_mainline(&self, lane: LaneId) -> bool {
        lane.0 < self.merge_lane().0
    }

    pub fn center(&self, lane: LaneId) -> f64 {
        self.lane_centers[lane.0]
    }

    pub fn entrance_end(&self) -> f64 {
        self.merge.start + self.merge.entrance_length
    }

    pub fn hard_end(&self) -> f64 {
        self.entrance_end() + self.merge.extension
    }

    /// Lanes whose band overlaps the lateral interval `[lo, hi]`.
    pub fn lanes_overlapping(&self, lo: f64, hi: f64) -> impl Iterator<Item = LaneId> + '_ {
        let half = self.lane_width / 2.0;
        self.lane_centers
            .iter()
            .enumerate()
            .filter(move |(_, c)| *c - half < hi && lo < *c + half)
            .map(|(i, _)| LaneId(i))
    }
}

/// Nearest lane center; an exact midpoint goes to the lower-index lane.
pub fn lane_of(x_lat: f64, geometry: &LaneGeometry) -> LaneId {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, c) in geometry.lane_centers.iter().enumerate() {
        let d = (x_lat - c).abs();
        if d < best_dist - MIDPOINT_TOLERANCE {
            best = i;
            best_dist = d;
        }
    }
    LaneId(best)
}

/// Distance from `y_long` to the end of the merge entrance, floored at zero.
pub fn distance_to_merge_end(
    x_lat: f64,
    y_long: f64,
    geometry: &LaneGeometry,
) -> Result<f64, GeometryError> {
    if lane_of(x_lat, geometry) != geometry.merge_lane() {
        return Err(GeometryError::NotInMergeLane(x_lat));
    }
    Ok((geometry.entrance_end() - y_long).max(0.0))
}
