//! What a driver sees: the nearest vehicles around it, magnified boundaries
//! of other vehicles, and the separating-axis collision-possibility index.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{lane_of, LaneGeometry, LaneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u32);

impl fmt::Display for VehicleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A rectangle in the road frame. `center` is `[x_lat, y_long]`; the heading
/// is measured from the road axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: [f64; 2],
    pub heading: f64,
    pub half_width: f64,
    pub half_length: f64,
}

impl OrientedRect {
    /// Unit vectors along the width and length of the rectangle.
    pub fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.heading.sin_cos();
        [[c, -s], [s, c]]
    }

    fn half_extents(&self) -> [f64; 2] {
        [self.half_width, self.half_length]
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [w, l] = self.axes();
        let (hw, hl) = (self.half_width, self.half_length);
        let at = |sw: f64, sl: f64| {
            [
                self.center[0] + sw * hw * w[0] + sl * hl * l[0],
                self.center[1] + sw * hw * w[1] + sl * hl * l[1],
            ]
        };
        [at(-1.0, -1.0), at(1.0, -1.0), at(1.0, 1.0), at(-1.0, 1.0)]
    }

    /// Same center and heading, both extents multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            half_width: self.half_width * factor,
            half_length: self.half_length * factor,
            ..*self
        }
    }

    /// Half of the lateral extent of the rectangle.
    pub fn lateral_reach(&self) -> f64 {
        let (s, c) = self.heading.sin_cos();
        (self.half_width * c).abs() + (self.half_length * s).abs()
    }
}

/// Magnification applied to an observed rectangle by a driver of aggressiveness `q`.
pub fn magnification(q: f64) -> f64 {
    1.0 + 0.3 * q
}

pub fn perceived_bounds(vehicle: &OrientedRect, observer_q: f64) -> OrientedRect {
    vehicle.scaled(magnification(observer_q))
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Separation of `b` from `a` along one of `a`'s edge directions.
///
/// `axis_index` 0 is `a`'s width axis, 1 its length axis. The edge of `a`
/// spans `[0, |v_i|]` measured from its rear-left corner; the gap is zero
/// when `b`'s projection meets that span.
pub fn projection_gap(a: &OrientedRect, b: &OrientedRect, axis_index: usize) -> f64 {
    let axis = a.axes()[axis_index];
    let edge = 2.0 * a.half_extents()[axis_index];
    let origin = a.corners()[0];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for corner in b.corners() {
        let p = dot([corner[0] - origin[0], corner[1] - origin[1]], axis);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi < 0.0 {
        -hi
    } else if lo > edge {
        lo - edge
    } else {
        0.0
    }
}

/// Aggregate gap of `b` measured on both axes of `a`.
pub fn collision_gap(a: &OrientedRect, b: &OrientedRect) -> f64 {
    projection_gap(a, b, 0).hypot(projection_gap(a, b, 1))
}

pub fn collision_index_from_gaps(d_a: f64, d_b: f64) -> f64 {
    (-((d_a * d_a + d_b * d_b) / 2.0).sqrt()).exp()
}

/// Collision-possibility index in `[0, 1]`: 1 when the rectangles overlap,
/// decaying toward 0 as they separate. Symmetric in its arguments.
pub fn collision_index(a: &OrientedRect, b: &OrientedRect) -> f64 {
    collision_index_from_gaps(collision_gap(a, b), collision_gap(b, a))
}

/// One vehicle as seen in a world snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleView {
    pub id: VehicleId,
    pub x_lat: f64,
    pub y_long: f64,
    pub heading: f64,
    pub speed: f64,
    pub width: f64,
    pub length: f64,
}

impl VehicleView {
    pub fn rect(&self) -> OrientedRect {
        OrientedRect {
            center: [self.x_lat, self.y_long],
            heading: self.heading,
            half_width: self.width / 2.0,
            half_length: self.length / 2.0,
        }
    }

    /// Bumper-to-bumper longitudinal gap, floored at zero.
    pub fn gap_to(&self, other: &VehicleView) -> f64 {
        ((other.y_long - self.y_long).abs() - (self.length + other.length) / 2.0).max(0.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub vehicles: Vec<VehicleView>,
}

impl Snapshot {
    pub fn get(&self, id: VehicleId) -> Option<&VehicleView> {
        self.vehicles.iter().find(|v| v.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: VehicleId,
    /// Bumper-to-bumper gap (m).
    pub gap: f64,
    /// Other vehicle's speed minus the ego speed (m/s).
    pub rel_speed: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LaneSlots {
    pub lane: Option<LaneId>,
    pub leader: Option<Neighbor>,
    pub follower: Option<Neighbor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Own,
    Right,
}

/// Nearest leader and follower in the ego lane and each adjacent lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Vicinity {
    pub ego: VehicleId,
    pub lane: LaneId,
    slots: [LaneSlots; 3],
}

impl Vicinity {
    pub fn slots(&self, side: Side) -> &LaneSlots {
        &self.slots[side as usize]
    }

    pub fn lane_slots(&self, lane: LaneId) -> Option<&LaneSlots> {
        self.slots.iter().find(|s| s.lane == Some(lane))
    }
}

/// Gaussian error on perceived gaps, seeded by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapNoise {
    pub sigma: f64,
}

impl GapNoise {
    /// Standard deviation for an observer of aggressiveness `q`.
    pub fn for_observer(sigma0: f64, q: f64) -> Self {
        Self {
            sigma: sigma0 * (1.0 - 0.5 * q),
        }
    }

    fn perturb<R: Rng + ?Sized>(&self, gap: f64, rng: &mut R) -> f64 {
        if self.sigma <= 0.0 {
            return gap;
        }
        let normal = Normal::new(0.0, self.sigma).expect("finite sigma");
        (gap + normal.sample(rng)).max(0.0)
    }
}

/// Observer-side settings for [`classify_vicinity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observer {
    /// Scale applied to other rectangles when deciding which lanes they occupy.
    pub magnification: f64,
    /// Vehicles farther than this are invisible.
    pub visibility: f64,
}

/// Classifies every visible vehicle as leader or follower in the lanes it
/// occupies and keeps the nearest one per slot.
///
/// A vehicle occupies each lane its magnified rectangle reaches into, so a
/// vehicle straddling a lane boundary shows up in both lanes. Returns `None`
/// when `ego` is not in the snapshot.
pub fn classify_vicinity<R: Rng + ?Sized>(
    ego: VehicleId,
    snapshot: &Snapshot,
    geometry: &LaneGeometry,
    observer: Observer,
    mut noise: Option<(GapNoise, &mut R)>,
) -> Option<Vicinity> {
    let me = snapshot.get(ego)?;
    let lane = lane_of(me.x_lat, geometry);
    let lane_at = |offset: isize| -> Option<LaneId> {
        let idx = lane.0 as isize + offset;
        (0..geometry.lane_count() as isize)
            .contains(&idx)
            .then_some(LaneId(idx as usize))
    };
    let mut slots = [
        LaneSlots {
            lane: lane_at(-1),
            ..Default::default()
        },
        LaneSlots {
            lane: Some(lane),
            ..Default::default()
        },
        LaneSlots {
            lane: lane_at(1),
            ..Default::default()
        },
    ];

    for other in &snapshot.vehicles {
        if other.id == ego {
            continue;
        }
        let gap = me.gap_to(other);
        if gap > observer.visibility {
            continue;
        }
        let seen = other.rect().scaled(observer.magnification);
        let reach = seen.lateral_reach();
        let ahead = other.y_long >= me.y_long;
        for occupied in geometry.lanes_overlapping(other.x_lat - reach, other.x_lat + reach) {
            let Some(slot) = slots.iter_mut().find(|s| s.lane == Some(occupied)) else {
                continue;
            };
            let entry = if ahead {
                &mut slot.leader
            } else {
                &mut slot.follower
            };
            let candidate = Neighbor {
                id: other.id,
                gap,
                rel_speed: other.speed - me.speed,
            };
            let closer = match entry {
                None => true,
                Some(cur) => {
                    let cur_view = snapshot.get(cur.id).expect("slot ids come from snapshot");
                    let d_new = (other.y_long - me.y_long).abs();
                    let d_cur = (cur_view.y_long - me.y_long).abs();
                    d_new < d_cur || (d_new == d_cur && other.id < cur.id)
                }
            };
            if closer {
                *entry = Some(candidate);
            }
        }
    }

    if let Some((model, rng)) = noise.as_mut() {
        for slot in &mut slots {
            for n in [&mut slot.leader, &mut slot.follower].into_iter().flatten() {
                n.gap = model.perturb(n.gap, &mut **rng);
            }
        }
    }

    Some(Vicinity {
        ego,
        lane,
        slots,
    })
}
