//! Lane decisions: the merging game, the accelerate/decelerate game played on
//! predicted states, discretionary lane changes for mainline vehicles, and the
//! end-of-lane guard.
//!
//! Every game is a 2×2 Stackelberg game between the deciding vehicle (leader)
//! and the follower in the lane it wants to enter. "Left" for the leader
//! means entering that lane; for the follower it means vacating it toward the
//! far side.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::PlannerConfig;
use crate::driver::DriverProfile;
use crate::dynamics::GRAVITY;
use crate::game::{
    headway_utility, merge_cost_left, merge_cost_stay, solve_stackelberg, Action, PayoffBimatrix,
    StackelbergSolution,
};
use crate::geometry::{distance_to_merge_end, lane_of, LaneGeometry, LaneId};
use crate::perception::{
    classify_vicinity, collision_index, GapNoise, Observer, Side, Snapshot, VehicleId,
    VehicleView, Vicinity,
};

/// Utility of a move that is geometrically impossible (no lane to move into).
pub const INFEASIBLE: f64 = -1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Maneuver {
    Stay,
    MergeNow,
    ChangeLane,
}

impl Maneuver {
    pub fn as_str(self) -> &'static str {
        match self {
            Maneuver::Stay => "stay",
            Maneuver::MergeNow => "merge",
            Maneuver::ChangeLane => "change",
        }
    }
}

impl fmt::Display for Maneuver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccelDirective {
    Hold,
    Accelerate,
    Decelerate,
}

impl AccelDirective {
    pub fn as_str(self) -> &'static str {
        match self {
            AccelDirective::Hold => "hold",
            AccelDirective::Accelerate => "accelerate",
            AccelDirective::Decelerate => "decelerate",
        }
    }
}

impl fmt::Display for AccelDirective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub maneuver: Maneuver,
    pub accel_directive: AccelDirective,
    pub competing_vehicle: Option<VehicleId>,
    pub target_lane: LaneId,
    /// Set when the end-of-lane guard overrode the games.
    pub forced_stop: bool,
}

impl Decision {
    pub fn stay(lane: LaneId) -> Self {
        Self {
            maneuver: Maneuver::Stay,
            accel_directive: AccelDirective::Hold,
            competing_vehicle: None,
            target_lane: lane,
            forced_stop: false,
        }
    }

    pub fn changes_lane(&self) -> bool {
        self.maneuver != Maneuver::Stay
    }
}

/// Fixed inputs shared by every decision in a run.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub geometry: &'a LaneGeometry,
    pub planner: &'a PlannerConfig,
    /// Profile assumed for another player whose own is not known.
    pub opponent: &'a DriverProfile,
    /// Profiles of the decision-driven vehicles; the games are played with
    /// complete information, so these are used whenever they apply.
    pub known: &'a [(VehicleId, DriverProfile)],
}

impl PlanContext<'_> {
    pub fn profile_of(&self, id: VehicleId) -> &DriverProfile {
        self.known
            .iter()
            .find(|(v, _)| *v == id)
            .map_or(self.opponent, |(_, p)| p)
    }
}

fn observer(profile: &DriverProfile) -> Observer {
    Observer {
        magnification: profile.magnification,
        visibility: profile.visibility,
    }
}

/// Gap and closing data of one vehicle relative to a reference vehicle.
#[derive(Debug, Clone, Copy)]
struct Rel {
    gap: f64,
    rel_speed: f64,
}

impl Rel {
    fn between(reference: &VehicleView, other: &VehicleView) -> Self {
        Self {
            gap: reference.gap_to(other),
            rel_speed: other.speed - reference.speed,
        }
    }
}

/// Nearest leader and follower of `around` among vehicles whose center lies
/// in `lane`, skipping `exclude`.
fn scan_lane<'s>(
    snapshot: &'s Snapshot,
    geometry: &LaneGeometry,
    lane: LaneId,
    around: &VehicleView,
    exclude: &[VehicleId],
    visibility: f64,
) -> (Option<&'s VehicleView>, Option<&'s VehicleView>) {
    let mut leader: Option<&VehicleView> = None;
    let mut follower: Option<&VehicleView> = None;
    for v in &snapshot.vehicles {
        if v.id == around.id || exclude.contains(&v.id) || lane_of(v.x_lat, geometry) != lane {
            continue;
        }
        if around.gap_to(v) > visibility {
            continue;
        }
        let d = v.y_long - around.y_long;
        let slot = if d >= 0.0 { &mut leader } else { &mut follower };
        let better = match slot {
            None => true,
            Some(cur) => {
                let dc = (cur.y_long - around.y_long).abs();
                d.abs() < dc || (d.abs() == dc && v.id < cur.id)
            }
        };
        if better {
            *slot = Some(v);
        }
    }
    (leader, follower)
}

fn penalty(cost: f64) -> f64 {
    cost.max(0.0)
}

/// Clipped lane-change cost against an optional follower.
fn entry_cost(follower: Option<Rel>, profile: &DriverProfile) -> f64 {
    match follower {
        Some(f) => penalty(merge_cost_left(f.gap, f.rel_speed, profile)),
        None => penalty(merge_cost_left(profile.visibility, 0.0, profile)),
    }
}

/// Score of moving into a lane with the given leader and follower.
fn lane_score(leader_gap: Option<f64>, follower: Option<Rel>, profile: &DriverProfile) -> f64 {
    headway_utility(leader_gap.unwrap_or(profile.visibility), profile) - entry_cost(follower, profile)
}

/// A solved lane game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneGame {
    pub target: LaneId,
    pub bimatrix: PayoffBimatrix,
    pub solution: StackelbergSolution,
    /// Leader's secure value of staying.
    pub stay_value: f64,
    /// The follower in the target lane (P2), if any.
    pub p2: Option<VehicleId>,
    /// The vehicle ahead of the insertion point, if any.
    pub target_leader: Option<VehicleId>,
}

impl LaneGame {
    pub fn wants_entry(&self) -> bool {
        self.solution.actions.leader == Action::Left
    }
}

/// Builds and solves the game for entering the adjacent lane `target`.
///
/// `d_e` is `Some` for a vehicle in the merge lane. A merge lane is not a
/// through lane, so staying in it is worth nothing beyond avoiding its
/// urgency cost.
pub fn lane_game(
    ego: &VehicleView,
    vicinity: &Vicinity,
    target: LaneId,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    d_e: Option<f64>,
) -> Option<LaneGame> {
    let slots = vicinity.lane_slots(target)?;
    if target == vicinity.lane {
        return None;
    }
    let geometry = ctx.geometry;

    let target_head = headway_utility(
        slots.leader.map_or(profile.visibility, |n| n.gap),
        profile,
    );
    let p2_rel = slots.follower.map(|n| Rel {
        gap: n.gap,
        rel_speed: n.rel_speed,
    });
    let u1_enter = target_head - entry_cost(p2_rel, profile);

    let u1_stay = match d_e {
        Some(d_e) => -penalty(merge_cost_stay(d_e, ego.speed, profile, true)),
        // Keeping a through lane costs nothing; only the headway counts.
        None => headway_utility(
            vicinity
                .slots(Side::Own)
                .leader
                .map_or(profile.visibility, |n| n.gap),
            profile,
        ),
    };

    let p2_view = slots.follower.and_then(|n| snapshot.get(n.id));
    let (u1_enter_vacated, u2) = match p2_view {
        None => (u1_enter, [0.0; 3]),
        Some(p2) => {
            let opp = ctx.profile_of(p2.id);
            let (p2_leader, p2_follower) =
                scan_lane(snapshot, geometry, target, p2, &[ego.id], opp.visibility);
            let u1_enter_vacated =
                target_head - entry_cost(p2_follower.map(|f| Rel::between(ego, f)), profile);

            let status_quo = headway_utility(
                p2_leader.map_or(opp.visibility, |l| p2.gap_to(l)),
                opp,
            );
            let behind_ego = headway_utility(p2.gap_to(ego), opp);
            let away = if target.0 < vicinity.lane.0 {
                target.left()
            } else {
                Some(LaneId(target.0 + 1))
            };
            let vacate = match away {
                Some(lane) if geometry.is_mainline(lane) => {
                    let (l, f) = scan_lane(snapshot, geometry, lane, p2, &[ego.id], opp.visibility);
                    lane_score(
                        l.map(|l| p2.gap_to(l)),
                        f.map(|f| Rel::between(p2, f)),
                        opp,
                    )
                }
                _ => INFEASIBLE,
            };
            (u1_enter_vacated, [status_quo, behind_ego, vacate])
        }
    };
    let [u2_status_quo, u2_behind_ego, u2_vacate] = u2;

    let bimatrix = PayoffBimatrix::from_fn(|pair| match (pair.leader, pair.follower) {
        (Action::Left, Action::Left) => (u1_enter_vacated, u2_vacate),
        (Action::Left, Action::Straight) => (u1_enter, u2_behind_ego),
        (Action::Straight, Action::Left) => (u1_stay, u2_vacate),
        (Action::Straight, Action::Straight) => (u1_stay, u2_status_quo),
    });
    let solution = solve_stackelberg(&bimatrix);
    let stay_value = bimatrix.secure_value(Action::Straight).0;
    Some(LaneGame {
        target,
        bimatrix,
        solution,
        stay_value,
        p2: p2_view.map(|v| v.id),
        target_leader: slots.leader.map(|n| n.id),
    })
}

/// Sampling step of the insertion sweep (s).
const SWEEP_STEP: f64 = 0.05;

/// True when the ego, moved onto the center of `target`, overlaps no
/// (magnified) vehicle near that lane at any time in `[0, horizon]` of
/// constant-velocity travel.
pub fn insertion_clear(
    ego: &VehicleView,
    target: LaneId,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    geometry: &LaneGeometry,
    horizon: f64,
) -> bool {
    let center = geometry.center(target);
    let band = geometry.lane_width;
    let samples = (horizon.max(0.0) / SWEEP_STEP).ceil() as usize;
    for k in 0..=samples {
        let h = (k as f64 * SWEEP_STEP).min(horizon.max(0.0));
        let me = VehicleView {
            x_lat: center,
            y_long: ego.y_long + ego.speed * h,
            heading: 0.0,
            ..*ego
        };
        for other in &snapshot.vehicles {
            if other.id == ego.id || (other.x_lat - center).abs() >= band {
                continue;
            }
            let (sin, cos) = other.heading.sin_cos();
            let moved = VehicleView {
                y_long: other.y_long + other.speed * cos * h,
                x_lat: other.x_lat + other.speed * sin * h,
                ..*other
            };
            let seen = moved.rect().scaled(profile.magnification);
            if collision_index(&me.rect(), &seen) >= 1.0 {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeOutcome {
    pub merge: bool,
    pub p2: Option<VehicleId>,
    pub game: Option<LaneGame>,
}

/// The merging game from the current vicinity.
///
/// A merge is only started inside the entrance, and only when the solved
/// leader action is to enter and the insertion stays clear of the target
/// lane for `sweep` seconds. Games on predicted states pass a zero sweep: the
/// ego adapts its speed once it has merged.
pub fn merging_game(
    ego: &VehicleView,
    vicinity: &Vicinity,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    d_e: f64,
    sweep: f64,
) -> MergeOutcome {
    let geometry = ctx.geometry;
    let Some(target) = geometry.merge_lane().left() else {
        return MergeOutcome {
            merge: false,
            p2: None,
            game: None,
        };
    };
    let open = ego.y_long >= geometry.merge.start && ego.y_long <= geometry.entrance_end();
    let (game, feasible) = entry_game(ego, vicinity, target, snapshot, profile, ctx, d_e, sweep);
    MergeOutcome {
        merge: open && feasible,
        p2: game.and_then(|g| g.p2),
        game,
    }
}

/// The merging game without the zone check: the game itself and whether it
/// says enter with a clear insertion.
#[allow(clippy::too_many_arguments)]
fn entry_game(
    ego: &VehicleView,
    vicinity: &Vicinity,
    target: LaneId,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    d_e: f64,
    sweep: f64,
) -> (Option<LaneGame>, bool) {
    let game = lane_game(ego, vicinity, target, snapshot, profile, ctx, Some(d_e));
    let feasible = game.is_some_and(|g| g.wants_entry())
        && insertion_clear(ego, target, snapshot, profile, ctx.geometry, sweep);
    (game, feasible)
}

/// Acceleration assumed (and later executed) for a directive.
pub fn directive_accel(profile: &DriverProfile, planner: &PlannerConfig) -> f64 {
    (planner.a_nom_g * GRAVITY).min(profile.accel_limit)
}

/// Propagates the ego at constant `accel` and everyone else at constant
/// velocity for `horizon` seconds. Speeds never go negative.
pub fn predict_states(snapshot: &Snapshot, ego: VehicleId, accel: f64, horizon: f64) -> Snapshot {
    let horizon = horizon.max(0.0);
    let vehicles = snapshot
        .vehicles
        .iter()
        .map(|v| {
            if horizon == 0.0 {
                return *v;
            }
            if v.id != ego {
                let (s, c) = v.heading.sin_cos();
                return VehicleView {
                    x_lat: v.x_lat + v.speed * s * horizon,
                    y_long: v.y_long + v.speed * c * horizon,
                    ..*v
                };
            }
            let stop_time = if accel < 0.0 { v.speed / -accel } else { f64::INFINITY };
            let t = horizon.min(stop_time);
            VehicleView {
                y_long: v.y_long + v.speed * t + 0.5 * accel * t * t,
                speed: (v.speed + accel * t).max(0.0),
                ..*v
            }
        })
        .collect();
    Snapshot {
        time: snapshot.time + horizon,
        vehicles,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectiveChoice {
    pub directive: AccelDirective,
    pub competing: Option<VehicleId>,
    /// Leader value of the chosen predicted game; `None` for Hold.
    pub value: Option<f64>,
}

/// How long a lane entry must stay clear: T(q), but never less than the time
/// a lane change takes to complete.
pub fn insertion_horizon(profile: &DriverProfile, planner: &PlannerConfig) -> f64 {
    profile.prediction_time.max(planner.min_insertion_time)
}

/// Horizons at which a directive is evaluated: every `step` seconds up to
/// `horizon`, always ending at `horizon`. A zero step evaluates `horizon` only.
fn horizon_samples(horizon: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if step > 0.0 {
        let mut h = step;
        while h < horizon - 1e-9 {
            out.push(h);
            h += step;
        }
    }
    out.push(horizon);
    out
}

/// Leader value and competing vehicle of a feasible merge in a predicted
/// configuration.
fn predicted_merge(
    ego: VehicleId,
    predicted: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    directive: AccelDirective,
) -> Option<(f64, Option<VehicleId>)> {
    let geometry = ctx.geometry;
    let me = predicted.get(ego)?;
    // A slot reached before the zone opens is still worth contesting.
    if me.y_long > geometry.entrance_end() {
        return None;
    }
    let target = geometry.merge_lane().left()?;
    let d_e = distance_to_merge_end(me.x_lat, me.y_long, geometry).ok()?;
    let vicinity =
        classify_vicinity::<ChaCha8Rng>(ego, predicted, geometry, observer(profile), None)?;
    let (game, feasible) = entry_game(me, &vicinity, target, predicted, profile, ctx, d_e, 0.0);
    let game = game.filter(|_| feasible)?;
    let competing = match directive {
        AccelDirective::Accelerate => game.p2,
        _ => game.target_leader,
    };
    Some((game.solution.leader_value, competing))
}

/// Plays the merging game on the states predicted under each directive and
/// keeps the directive whose predicted merge is feasible and worth more.
///
/// Each directive is tried at several look-ahead times up to
/// `horizon_factor · T(q)` (at least `min_horizon`); its worth is its best
/// feasible predicted game.
/// The competing vehicle of a directive is the target-lane vehicle whose
/// slot the ego contests in the predicted configuration: the one it gets
/// ahead of when accelerating, the one it drops behind when decelerating.
pub fn acceleration_game(
    ego: VehicleId,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    current_p2: Option<VehicleId>,
) -> DirectiveChoice {
    let horizon = (ctx.planner.horizon_factor * profile.prediction_time)
        .max(ctx.planner.min_horizon);
    let a = directive_accel(profile, ctx.planner);
    let mut best: Option<(f64, AccelDirective, Option<VehicleId>)> = None;
    // Decelerate first so that it wins ties.
    for (directive, accel) in [
        (AccelDirective::Decelerate, -a),
        (AccelDirective::Accelerate, a),
    ] {
        for h in horizon_samples(horizon, ctx.planner.horizon_step) {
            let predicted = predict_states(snapshot, ego, accel, h);
            let Some((value, competing)) =
                predicted_merge(ego, &predicted, profile, ctx, directive)
            else {
                continue;
            };
            let competing = competing.or(current_p2);
            if best.is_none_or(|(v, _, _)| value > v) {
                best = Some((value, directive, competing));
            }
        }
    }
    match best {
        Some((value, directive, competing)) => DirectiveChoice {
            directive,
            competing,
            value: Some(value),
        },
        None => DirectiveChoice {
            directive: AccelDirective::Hold,
            competing: current_p2,
            value: None,
        },
    }
}

/// Best adjacent mainline lane worth changing into, if any.
pub fn discretionary_lane_change(
    ego: &VehicleView,
    vicinity: &Vicinity,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
) -> Option<LaneGame> {
    let geometry = ctx.geometry;
    let mut best: Option<(f64, LaneGame)> = None;
    for side in [Side::Left, Side::Right] {
        let Some(lane) = vicinity.slots(side).lane else {
            continue;
        };
        if !geometry.is_mainline(lane) {
            continue;
        }
        let Some(game) = lane_game(ego, vicinity, lane, snapshot, profile, ctx, None) else {
            continue;
        };
        let gain = game.solution.leader_value - game.stay_value;
        if !game.wants_entry() || gain <= ctx.planner.hysteresis {
            continue;
        }
        if !insertion_clear(ego, lane, snapshot, profile, geometry, insertion_horizon(profile, ctx.planner)) {
            continue;
        }
        if best.as_ref().is_none_or(|(g, _)| gain > *g) {
            best = Some((gain, game));
        }
    }
    best.map(|(_, g)| g)
}

/// True when the remaining entrance is shorter than a comfortable stop plus
/// the sufficient distance.
pub fn end_of_lane_pressing(d_e: f64, speed: f64, profile: &DriverProfile, planner: &PlannerConfig) -> bool {
    let decel = planner.guard_decel_g * GRAVITY;
    d_e < speed * speed / (2.0 * decel) + profile.sufficient_distance
}

/// One epoch's decision for the vehicle `ego`.
///
/// Gap noise, when given, perturbs only the ego's own observation; the
/// predicted games reason on exact predicted gaps.
pub fn decide<R: Rng + ?Sized>(
    ego: VehicleId,
    snapshot: &Snapshot,
    profile: &DriverProfile,
    ctx: &PlanContext<'_>,
    noise: Option<(GapNoise, &mut R)>,
) -> Option<Decision> {
    let geometry = ctx.geometry;
    let me = snapshot.get(ego)?;
    let vicinity = classify_vicinity(ego, snapshot, geometry, observer(profile), noise)?;
    let lane = vicinity.lane;

    if lane == geometry.merge_lane() {
        let target = lane.left().unwrap_or(lane);
        let d_e = distance_to_merge_end(me.x_lat, me.y_long, geometry).unwrap_or(0.0);
        let outcome = merging_game(me, &vicinity, snapshot, profile, ctx, d_e, insertion_horizon(profile, ctx.planner));
        if outcome.merge {
            return Some(Decision {
                maneuver: Maneuver::MergeNow,
                accel_directive: AccelDirective::Hold,
                competing_vehicle: outcome.p2,
                target_lane: target,
                forced_stop: false,
            });
        }
        let choice = acceleration_game(ego, snapshot, profile, ctx, outcome.p2);
        let forced = choice.directive == AccelDirective::Hold
            && end_of_lane_pressing(d_e, me.speed, profile, ctx.planner);
        return Some(Decision {
            maneuver: Maneuver::Stay,
            accel_directive: if forced {
                AccelDirective::Decelerate
            } else {
                choice.directive
            },
            competing_vehicle: choice.competing,
            target_lane: target,
            forced_stop: forced,
        });
    }

    Some(
        match discretionary_lane_change(me, &vicinity, snapshot, profile, ctx) {
            Some(game) => Decision {
                maneuver: Maneuver::ChangeLane,
                accel_directive: AccelDirective::Hold,
                competing_vehicle: game.p2,
                target_lane: game.target,
                forced_stop: false,
            },
            None => Decision::stay(lane),
        },
    )
}
