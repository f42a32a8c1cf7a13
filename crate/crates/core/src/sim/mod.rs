//! Fixed-step world: snapshot → decisions at epoch boundaries → controllers
//! → dynamics → log.

pub mod log;
pub mod scenario;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::{ConfigError, SimConfig};
use crate::driver::{
    blend_errors, longitudinal_accel, profile_from_q, steering_command, ChannelError, DriverError,
    DriverProfile,
};
use crate::dynamics::{pose_derivative, step, Controls, DynamicsError, VehicleState, GRAVITY};
use crate::geometry::{lane_of, LaneGeometry, LaneId};
use crate::perception::{
    classify_vicinity, collision_index, GapNoise, Neighbor, Observer, Side, Snapshot, VehicleId,
    VehicleView,
};
use crate::planner::{decide, directive_accel, AccelDirective, Decision, Maneuver, PlanContext};

pub use log::{Flags, LogParseError, LogRow, TrajectoryLog, TRAJECTORY_HEADER};
pub use scenario::{ScenarioDef, ScenarioError, ScenarioVehicle, VehicleKind, MERGING_ID, NOMINAL_Q};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("vehicle {id}: {source}")]
    Dynamics {
        id: VehicleId,
        #[source]
        source: DynamicsError,
    },
}

#[derive(Debug, Clone)]
enum Driver {
    Scripted,
    Decision {
        profile: DriverProfile,
        decision: Decision,
        /// Lane change in progress; no new decision until it completes.
        latch: Option<Decision>,
        rng: ChaCha8Rng,
    },
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: VehicleId,
    pub name: String,
    pub state: VehicleState,
    /// Preset speed from the scenario (m/s).
    pub v0: f64,
    /// Speed the controller tracks when unconstrained (m/s).
    pub cruise: f64,
    driver: Driver,
    prev_accel: f64,
}

impl Vehicle {
    pub fn is_decision(&self) -> bool {
        matches!(self.driver, Driver::Decision { .. })
    }

    pub fn profile(&self) -> Option<&DriverProfile> {
        match &self.driver {
            Driver::Decision { profile, .. } => Some(profile),
            Driver::Scripted => None,
        }
    }

    fn view(&self, width: f64, length: f64) -> VehicleView {
        VehicleView {
            id: self.id,
            x_lat: self.state.x_lat,
            y_long: self.state.y_long,
            heading: self.state.theta,
            speed: self.state.speed(),
            width,
            length,
        }
    }
}

/// A completed or interrupted lane change.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneChangeEvent {
    pub id: VehicleId,
    pub maneuver: Maneuver,
    pub from: LaneId,
    pub to: LaneId,
    pub start: f64,
    /// First time the vehicle's center was inside the target lane; this is
    /// when a merge counts as done.
    pub entered: Option<f64>,
    /// Time the vehicle settled on the target lane center.
    pub end: Option<f64>,
    pub competing: Option<VehicleId>,
    /// Nearest vehicles ahead of and behind the vehicle in the target lane
    /// when the change completed.
    pub leader_after: Option<VehicleId>,
    pub follower_after: Option<VehicleId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Ran to `t_max`.
    TimeLimit,
    /// Every decision vehicle merged, centered and quiet for the settle time.
    Settled,
    /// True rectangles of `a` and `b` intersected at `t`.
    Collision { a: VehicleId, b: VehicleId, t: f64 },
    /// Nothing to simulate.
    Empty,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub termination: Termination,
    pub end_time: f64,
    pub forced_stop: bool,
    pub events: Vec<LaneChangeEvent>,
    pub log: TrajectoryLog,
    /// Preset speeds, for disturbance metrics.
    pub preset_speeds: Vec<(VehicleId, f64)>,
}

impl RunOutcome {
    pub fn collided(&self) -> bool {
        matches!(self.termination, Termination::Collision { .. })
    }

    /// The merge of vehicle `id` out of the merge lane, if it settled.
    pub fn merge_event(&self, id: VehicleId) -> Option<&LaneChangeEvent> {
        self.events
            .iter()
            .find(|e| e.id == id && e.maneuver == Maneuver::MergeNow && e.end.is_some())
    }

    /// When vehicle `id` entered the mainline from the merge lane.
    pub fn merge_time(&self, id: VehicleId) -> Option<f64> {
        self.merge_event(id).and_then(|e| e.entered)
    }

    pub fn completed_changes(&self, id: VehicleId) -> impl Iterator<Item = &LaneChangeEvent> + '_ {
        self.events.iter().filter(move |e| e.id == id && e.end.is_some())
    }

    pub fn preset_speed(&self, id: VehicleId) -> Option<f64> {
        self.preset_speeds.iter().find(|(v, _)| *v == id).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub geometry: LaneGeometry,
    pub config: SimConfig,
    pub vehicles: Vec<Vehicle>,
    opponent: DriverProfile,
}

const KMH: f64 = 1.0 / 3.6;

/// Speed error below which a vehicle counts as back at cruise.
const CRUISE_TOLERANCE: f64 = 0.5;

impl World {
    pub fn new(scenario: &ScenarioDef, config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        scenario.validate()?;
        let geometry = scenario.geometry.clone();
        let params = &config.vehicle;
        let mut vehicles: Vec<Vehicle> = scenario
            .vehicles
            .iter()
            .map(|sv| -> Result<Vehicle, SimError> {
                let v0 = sv.v0_kmh * KMH;
                let id = VehicleId(sv.id);
                let start_lane = lane_of(sv.x0_m, &geometry);
                let (driver, cruise) = match sv.kind {
                    VehicleKind::Scripted => (Driver::Scripted, v0),
                    VehicleKind::Decision => {
                        let profile = profile_from_q(sv.q_or_nominal(), &config.profile, params)?;
                        let cruise = if start_lane == geometry.merge_lane() {
                            config.planner.merge_cruise_kmh * KMH
                        } else {
                            v0
                        };
                        let seed = config.seed ^ u64::from(sv.id).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                        (
                            Driver::Decision {
                                profile,
                                decision: Decision::stay(start_lane),
                                latch: None,
                                rng: ChaCha8Rng::seed_from_u64(seed),
                            },
                            cruise,
                        )
                    }
                };
                Ok(Vehicle {
                    id,
                    name: sv.label(),
                    state: VehicleState::cruising(sv.x0_m, sv.y0_m, v0),
                    v0,
                    cruise,
                    driver,
                    prev_accel: 0.0,
                })
            })
            .collect::<Result<_, _>>()?;
        vehicles.sort_by_key(|v| v.id);
        let opponent = profile_from_q(config.planner.opponent_q, &config.profile, params)?;
        Ok(Self {
            geometry,
            config: config.clone(),
            vehicles,
            opponent,
        })
    }

    pub fn snapshot(&self, time: f64) -> Snapshot {
        let (w, l) = (self.config.vehicle.width, self.config.vehicle.length);
        Snapshot {
            time,
            vehicles: self.vehicles.iter().map(|v| v.view(w, l)).collect(),
        }
    }
}

fn nearest(a: Option<Neighbor>, b: Option<Neighbor>) -> Option<Neighbor> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.gap < x.gap { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Longitudinal and steering commands of one decision vehicle.
fn decision_controls(
    vehicle: &Vehicle,
    profile: &DriverProfile,
    decision: &Decision,
    latch: Option<&Decision>,
    snapshot: &Snapshot,
    world: &World,
) -> Controls {
    let cfg = &world.config;
    let geometry = &world.geometry;
    let planner = &cfg.planner;
    let gains = &cfg.gains;
    let s = &vehicle.state;
    let v = s.speed();
    let lane = lane_of(s.x_lat, geometry);

    let observer = Observer {
        magnification: profile.magnification,
        visibility: profile.visibility,
    };
    let vicinity = classify_vicinity::<ChaCha8Rng>(vehicle.id, snapshot, geometry, observer, None)
        .expect("vehicle is in its own snapshot");
    let own = vicinity.slots(Side::Own);
    let target = latch.map(|d| vicinity.lane_slots(d.target_lane).copied().unwrap_or_default());
    let leader = nearest(own.leader, target.and_then(|t| t.leader));
    let follower = nearest(own.follower, target.and_then(|t| t.follower));

    let velocity = ChannelError {
        error: vehicle.cruise - v,
        rate: -vehicle.prev_accel,
    };
    let headway = leader.map(|l| {
        let mut d_ref = (profile.prediction_time * v).max(planner.standstill_gap);
        if let Some(f) = follower {
            d_ref = d_ref.min(((l.gap + f.gap) / 2.0).max(planner.standstill_gap));
        }
        ChannelError {
            error: l.gap - d_ref,
            rate: l.rel_speed,
        }
    });
    let blended = blend_errors(velocity, headway, gains);
    let pd = longitudinal_accel(profile, gains, blended.error, blended.rate);
    let headway_only = headway
        .map(|h| longitudinal_accel(profile, gains, h.error, h.rate))
        .unwrap_or(f64::INFINITY);

    let in_merge_lane = lane == geometry.merge_lane() && latch.is_none();
    let mut accel = pd;
    if in_merge_lane {
        let a_dir = directive_accel(profile, planner);
        accel = match decision.accel_directive {
            AccelDirective::Hold => pd,
            AccelDirective::Accelerate => {
                let a = if v < vehicle.cruise * planner.max_speed_factor { a_dir } else { 0.0 };
                a.min(headway_only)
            }
            AccelDirective::Decelerate => {
                let a = if v > vehicle.cruise * planner.min_speed_factor || decision.forced_stop {
                    -a_dir
                } else {
                    0.0
                };
                a.min(headway_only)
            }
        };
        // Never run past the hard end while still in the merge lane.
        let room = geometry.hard_end() - s.y_long - cfg.vehicle.length / 2.0 - 1.0;
        let comfortable = planner.guard_decel_g * GRAVITY;
        if decision.forced_stop || room < v * v / (2.0 * comfortable) {
            let required = v * v / (2.0 * room.max(0.1));
            accel = accel.min(-required.min(gains.g_pl));
        }
    }

    let x_ref = geometry.center(latch.map_or(lane, |d| d.target_lane));
    let pose = pose_derivative(s);
    let steer = steering_command(
        profile,
        gains,
        s.x_lat - x_ref,
        pose.d_lat,
        &cfg.vehicle,
        s.v_long,
    );
    Controls { accel, steer }
}

fn max_collision_index(snapshot: &Snapshot, i: usize) -> f64 {
    let me = &snapshot.vehicles[i];
    let rect = me.rect();
    snapshot
        .vehicles
        .iter()
        .enumerate()
        .filter(|(j, o)| *j != i && (o.y_long - me.y_long).abs() < 50.0)
        .map(|(_, o)| collision_index(&rect, &o.rect()))
        .fold(0.0, f64::max)
}

fn first_collision(snapshot: &Snapshot) -> Option<(VehicleId, VehicleId)> {
    let vs = &snapshot.vehicles;
    for i in 0..vs.len() {
        for j in i + 1..vs.len() {
            if (vs[i].y_long - vs[j].y_long).abs() > vs[i].length + vs[j].length {
                continue;
            }
            if collision_index(&vs[i].rect(), &vs[j].rect()) >= 1.0 {
                return Some((vs[i].id, vs[j].id));
            }
        }
    }
    None
}

/// Neighbors ahead and behind `view` among vehicles centered in `lane`.
fn lane_neighbors(snapshot: &Snapshot, geometry: &LaneGeometry, view: &VehicleView, lane: LaneId) -> (Option<VehicleId>, Option<VehicleId>) {
    let mut ahead: Option<(f64, VehicleId)> = None;
    let mut behind: Option<(f64, VehicleId)> = None;
    for o in &snapshot.vehicles {
        if o.id == view.id || lane_of(o.x_lat, geometry) != lane {
            continue;
        }
        let d = o.y_long - view.y_long;
        let slot = if d >= 0.0 { &mut ahead } else { &mut behind };
        if slot.is_none_or(|(best, _)| d.abs() < best) {
            *slot = Some((d.abs(), o.id));
        }
    }
    (ahead.map(|a| a.1), behind.map(|b| b.1))
}

impl World {
    fn log_rows(&self, t: f64, snapshot: &Snapshot, collided: Option<(VehicleId, VehicleId)>, log: &mut TrajectoryLog) {
        for (i, v) in self.vehicles.iter().enumerate() {
            let view = &snapshot.vehicles[i];
            let (maneuver, directive, competing, mut flags) = match &v.driver {
                Driver::Scripted => (None, None, None, Flags::default()),
                Driver::Decision { decision, latch, .. } => {
                    let shown = latch.as_ref().unwrap_or(decision);
                    (
                        Some(shown.maneuver),
                        Some(shown.accel_directive),
                        shown.competing_vehicle,
                        Flags {
                            forced_stop: decision.forced_stop && latch.is_none(),
                            lane_change: latch.is_some(),
                            collision: false,
                        },
                    )
                }
            };
            flags.collision = collided.is_some_and(|(a, b)| a == v.id || b == v.id);
            log.rows.push(LogRow {
                t,
                id: v.id,
                x_lat: v.state.x_lat,
                y_long: v.state.y_long,
                v: view.speed,
                theta: v.state.theta,
                lane: lane_of(v.state.x_lat, &self.geometry),
                maneuver,
                accel_directive: directive,
                competing,
                i_col: max_collision_index(snapshot, i),
                flags,
            });
        }
    }

    fn is_settled(&self, v: &Vehicle) -> bool {
        match &v.driver {
            Driver::Scripted => true,
            Driver::Decision { decision, latch, .. } => {
                let lane = lane_of(v.state.x_lat, &self.geometry);
                latch.is_none()
                    && decision.maneuver == Maneuver::Stay
                    && self.geometry.is_mainline(lane)
                    && (v.state.x_lat - self.geometry.center(lane)).abs()
                        < self.config.planner.latch_tolerance
                    && (v.state.speed() - v.cruise).abs() < CRUISE_TOLERANCE
            }
        }
    }

    /// Runs until `t_max`, a collision, or every decision vehicle settles.
    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        let cfg = self.config.clone();
        let dt = cfg.dt;
        let epoch_steps = cfg.epoch_steps().max(1);
        let steps = (cfg.t_max / dt).round() as usize;
        let mut log = TrajectoryLog::default();
        let mut events: Vec<LaneChangeEvent> = Vec::new();
        let mut forced_stop = false;
        let preset_speeds = self.vehicles.iter().map(|v| (v.id, v.v0)).collect();
        let has_decision = self.vehicles.iter().any(Vehicle::is_decision);
        let settle_steps = (cfg.settle_time / dt).round() as usize;
        let mut quiet_steps = 0usize;

        if self.vehicles.is_empty() {
            return Ok(RunOutcome {
                termination: Termination::Empty,
                end_time: 0.0,
                forced_stop,
                events,
                log,
                preset_speeds,
            });
        }

        let mut termination = Termination::TimeLimit;
        let mut k = 0usize;
        loop {
            let t = k as f64 * dt;
            let snapshot = self.snapshot(t);

            // Latched lane changes complete as soon as the vehicle centers.
            for i in 0..self.vehicles.len() {
                let x = self.vehicles[i].state.x_lat;
                let view = snapshot.vehicles[i];
                let geometry = &self.geometry;
                if let Driver::Decision { latch, decision, .. } = &mut self.vehicles[i].driver {
                    if let Some(d) = latch {
                        if lane_of(x, geometry) == d.target_lane {
                            if let Some(e) = events
                                .iter_mut()
                                .rev()
                                .find(|e| e.id == view.id && e.end.is_none() && e.entered.is_none())
                            {
                                e.entered = Some(t);
                            }
                        }
                        if (x - geometry.center(d.target_lane)).abs() < cfg.planner.latch_tolerance {
                            let (ahead, behind) = lane_neighbors(&snapshot, geometry, &view, d.target_lane);
                            if let Some(e) = events
                                .iter_mut()
                                .rev()
                                .find(|e| e.id == view.id && e.end.is_none())
                            {
                                e.end = Some(t);
                                e.leader_after = ahead;
                                e.follower_after = behind;
                            }
                            *decision = Decision::stay(d.target_lane);
                            *latch = None;
                        }
                    }
                }
            }

            if k % epoch_steps == 0 {
                let known: Vec<(VehicleId, DriverProfile)> = self
                    .vehicles
                    .iter()
                    .filter_map(|v| v.profile().map(|p| (v.id, *p)))
                    .collect();
                let ctx = PlanContext {
                    geometry: &self.geometry,
                    planner: &cfg.planner,
                    opponent: &self.opponent,
                    known: &known,
                };
                let mut fresh = Vec::new();
                for v in self.vehicles.iter_mut() {
                    if let Driver::Decision { profile, latch: None, rng, .. } = &mut v.driver {
                        let noise = cfg
                            .perception
                            .noise
                            .then(|| (GapNoise::for_observer(cfg.perception.sigma0, profile.q), rng));
                        if let Some(d) = decide(v.id, &snapshot, profile, &ctx, noise) {
                            fresh.push((v.id, d));
                        }
                    }
                }
                for (id, d) in fresh {
                    let v = self.vehicles.iter_mut().find(|v| v.id == id).expect("known id");
                    let from = lane_of(v.state.x_lat, &self.geometry);
                    if let Driver::Decision { decision, latch, .. } = &mut v.driver {
                        if d.changes_lane() {
                            *latch = Some(d);
                            events.push(LaneChangeEvent {
                                id,
                                maneuver: d.maneuver,
                                from,
                                to: d.target_lane,
                                start: t,
                                entered: None,
                                end: None,
                                competing: d.competing_vehicle,
                                leader_after: None,
                                follower_after: None,
                            });
                        }
                        if d.changes_lane() || *decision != d {
                            quiet_steps = 0;
                        }
                        forced_stop |= d.forced_stop;
                        *decision = d;
                    }
                }
            }

            let collided = first_collision(&snapshot);
            self.log_rows(t, &snapshot, collided, &mut log);
            if let Some((a, b)) = collided {
                termination = Termination::Collision { a, b, t };
                break;
            }
            if has_decision {
                if self.vehicles.iter().all(|v| self.is_settled(v)) {
                    quiet_steps += 1;
                } else {
                    quiet_steps = 0;
                }
                if quiet_steps > settle_steps {
                    termination = Termination::Settled;
                    break;
                }
            }
            if k >= steps {
                break;
            }

            let controls: Vec<Controls> = self
                .vehicles
                .iter()
                .map(|v| match &v.driver {
                    Driver::Scripted => Controls::default(),
                    Driver::Decision { profile, decision, latch, .. } => {
                        decision_controls(v, profile, decision, latch.as_ref(), &snapshot, &self)
                    }
                })
                .collect();
            for (v, c) in self.vehicles.iter_mut().zip(controls) {
                v.state = step(&v.state, &cfg.vehicle, &c, dt)
                    .map_err(|source| SimError::Dynamics { id: v.id, source })?;
                v.prev_accel = c.accel;
            }
            k += 1;
        }

        Ok(RunOutcome {
            termination,
            end_time: k as f64 * dt,
            forced_stop,
            events,
            log,
            preset_speeds,
        })
    }
}

/// Builds the world and runs it.
pub fn run_scenario(scenario: &ScenarioDef, config: &SimConfig) -> Result<RunOutcome, SimError> {
    World::new(scenario, config)?.run()
}
