use rand_chacha::ChaCha8Rng;

use merge_sim::config::{PlannerConfig, SimConfig};
use merge_sim::driver::{profile_from_q, DriverProfile};
use merge_sim::geometry::{LaneGeometry, LaneId};
use merge_sim::perception::{GapNoise, Snapshot, VehicleId, VehicleView};
use merge_sim::planner::{decide, end_of_lane_pressing, AccelDirective, Decision, Maneuver, PlanContext};

fn profile(q: f64) -> DriverProfile {
    let c = SimConfig::default();
    profile_from_q(q, &c.profile, &c.vehicle).unwrap()
}

fn car(id: u32, x: f64, y: f64, speed: f64) -> VehicleView {
    VehicleView {
        id: VehicleId(id),
        x_lat: x,
        y_long: y,
        heading: 0.0,
        speed,
        width: 1.8,
        length: 4.5,
    }
}

fn decide_for(ego: u32, q: f64, vehicles: Vec<VehicleView>) -> Decision {
    let geometry = LaneGeometry::highway_merge();
    let planner = PlannerConfig::default();
    let opponent = profile(planner.opponent_q);
    let ctx = PlanContext {
        geometry: &geometry,
        planner: &planner,
        opponent: &opponent,
        known: &[],
    };
    let snapshot = Snapshot { time: 0.0, vehicles };
    decide::<ChaCha8Rng>(VehicleId(ego), &snapshot, &profile(q), &ctx, None::<(GapNoise, &mut ChaCha8Rng)>)
        .expect("ego is in the snapshot")
}

#[test]
fn lone_merger_in_zone_merges() {
    for q in [0.1, 0.5, 0.9] {
        let d = decide_for(6, q, vec![car(6, 9.9, 80.0, 22.2)]);
        assert_eq!(d.maneuver, Maneuver::MergeNow, "q={q}");
        assert_eq!(d.target_lane, LaneId(2));
        assert!(!d.forced_stop);
    }
}

#[test]
fn no_merge_before_zone_opens() {
    let d = decide_for(6, 0.9, vec![car(6, 9.9, 10.0, 22.2)]);
    assert_eq!(d.maneuver, Maneuver::Stay);
}

#[test]
fn no_merge_into_an_occupied_slot() {
    for q in [0.1, 0.5, 0.9] {
        let d = decide_for(6, q, vec![car(6, 9.9, 80.0, 22.2), car(4, 6.6, 80.0, 22.2)]);
        assert_ne!(d.maneuver, Maneuver::MergeNow, "q={q}");
    }
}

#[test]
fn cautious_merger_yields_to_a_close_follower() {
    // Mainline follower 3 m behind and closing: a cautious driver waits.
    let d = decide_for(6, 0.1, vec![car(6, 9.9, 80.0, 20.0), car(4, 6.6, 72.5, 24.0)]);
    assert_eq!(d.maneuver, Maneuver::Stay);
    assert_ne!(d.accel_directive, AccelDirective::Accelerate);
}

#[test]
fn free_mainline_driver_keeps_its_lane() {
    let d = decide_for(1, 0.5, vec![car(1, 3.3, 0.0, 22.2)]);
    assert_eq!(d.maneuver, Maneuver::Stay);
    assert_eq!(d.target_lane, LaneId(1));
}

#[test]
fn blocked_driver_moves_to_open_lane() {
    // A slow car 15 m ahead in the middle lane, nothing in the left lane.
    let d = decide_for(1, 0.9, vec![car(1, 3.3, 0.0, 22.2), car(2, 3.3, 19.5, 15.0)]);
    assert_eq!(d.maneuver, Maneuver::ChangeLane);
    assert!(d.changes_lane());
}

#[test]
fn missing_ego_yields_nothing() {
    let geometry = LaneGeometry::highway_merge();
    let planner = PlannerConfig::default();
    let opponent = profile(0.5);
    let ctx = PlanContext {
        geometry: &geometry,
        planner: &planner,
        opponent: &opponent,
        known: &[],
    };
    let none = decide::<ChaCha8Rng>(VehicleId(9), &Snapshot::default(), &opponent, &ctx, None);
    assert!(none.is_none());
}

#[test]
fn end_of_lane_pressure_grows_with_speed_and_shrinks_with_room() {
    let p = profile(0.5);
    let planner = PlannerConfig::default();
    assert!(end_of_lane_pressing(5.0, 22.2, &p, &planner));
    assert!(!end_of_lane_pressing(500.0, 22.2, &p, &planner));
    let threshold = |v: f64| (0..2000).map(|k| k as f64 * 0.5).find(|d| !end_of_lane_pressing(*d, v, &p, &planner)).unwrap();
    assert!(threshold(25.0) > threshold(15.0));
}
