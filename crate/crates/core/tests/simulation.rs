use merge_sim::config::SimConfig;
use merge_sim::geometry::LaneGeometry;
use merge_sim::metrics::{longitudinal_disturbance, run_cell, SWEEP_MAINLINE_ID};
use merge_sim::perception::VehicleId;
use merge_sim::sim::{
    run_scenario, ScenarioDef, ScenarioVehicle, Termination, TrajectoryLog, VehicleKind, MERGING_ID,
    TRAJECTORY_HEADER,
};

const MERGER: VehicleId = VehicleId(MERGING_ID);

fn scenario(name: &str, q: f64) -> ScenarioDef {
    let mut s = ScenarioDef::builtin(name).unwrap();
    s.set_q("merging", q).unwrap();
    s
}

#[test]
fn lone_scripted_vehicle_holds_speed_and_lane() {
    let s = ScenarioDef {
        geometry: LaneGeometry::highway_merge(),
        vehicles: vec![ScenarioVehicle {
            id: 1,
            name: None,
            x0_m: 3.3,
            y0_m: 0.0,
            v0_kmh: 80.0,
            kind: VehicleKind::Scripted,
            q: None,
        }],
    };
    let config = SimConfig {
        t_max: 10.0,
        ..SimConfig::default()
    };
    let out = run_scenario(&s, &config).unwrap();
    let v0 = 80.0 / 3.6;
    for r in out.log.rows_for(VehicleId(1)) {
        assert!((r.v - v0).abs() < 1e-9);
        assert!((r.x_lat - 3.3).abs() <= 1e-6);
    }
    let last = out.log.rows_for(VehicleId(1)).last().unwrap();
    assert!((last.y_long - v0 * last.t).abs() < 1e-6);
}

#[test]
fn scripted_vehicles_never_leave_their_lane_in_builtins() {
    for name in ["scenario1", "scenario2"] {
        for q in [0.1, 0.5, 0.9] {
            let s = scenario(name, q);
            let out = run_scenario(&s, &SimConfig::default()).unwrap();
            for v in s.vehicles.iter().filter(|v| v.kind == VehicleKind::Scripted) {
                let v0 = v.v0_kmh / 3.6;
                for r in out.log.rows_for(VehicleId(v.id)) {
                    assert!((r.x_lat - v.x0_m).abs() <= 1e-6, "{name} q={q} id={}", v.id);
                    assert!((r.v - v0).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn merges_complete_before_the_hard_end_without_collisions() {
    for name in ["scenario1", "scenario2"] {
        for q in [0.1, 0.5, 0.9] {
            let s = scenario(name, q);
            let out = run_scenario(&s, &SimConfig::default()).unwrap();
            assert!(!out.collided(), "{name} q={q}: {:?}", out.termination);
            assert_eq!(out.termination, Termination::Settled, "{name} q={q}");
            let event = out.merge_event(MERGER).expect("merged");
            let end = event.end.unwrap();
            let row = out
                .log
                .rows_for(MERGER)
                .find(|r| r.t >= end - 1e-9)
                .unwrap();
            assert!(row.y_long <= s.geometry.hard_end(), "{name} q={q}: y={}", row.y_long);
            assert!(out.log.rows.iter().all(|r| r.i_col < 1.0));
        }
    }
}

#[test]
fn identical_inputs_give_identical_logs() {
    let s = scenario("scenario2", 0.5);
    let config = SimConfig {
        seed: 11,
        perception: merge_sim::config::PerceptionConfig {
            noise: true,
            ..Default::default()
        },
        ..SimConfig::default()
    };
    let a = run_scenario(&s, &config).unwrap();
    let b = run_scenario(&s, &config).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.log.to_csv(), b.log.to_csv());
}

#[test]
fn noise_seed_changes_nothing_when_noise_is_off() {
    let s = scenario("scenario1", 0.5);
    let a = run_scenario(&s, &SimConfig::default()).unwrap();
    let b = run_scenario(&s, &SimConfig { seed: 99, ..SimConfig::default() }).unwrap();
    assert_eq!(a.log, b.log);
}

#[test]
fn trajectory_csv_round_trips() {
    let out = run_scenario(&scenario("scenario1", 0.9), &SimConfig::default()).unwrap();
    let text = out.log.to_csv();
    assert_eq!(text.lines().next().unwrap(), TRAJECTORY_HEADER);
    assert_eq!(
        TRAJECTORY_HEADER,
        "t,id,x_lat,y_long,v,theta,lane,maneuver,accel_directive,competing_id,i_col,flags"
    );
    let back = TrajectoryLog::from_csv(&text).unwrap();
    assert_eq!(back.to_csv(), text);
    assert_eq!(back.rows.len(), out.log.rows.len());
}

#[test]
fn malformed_trajectory_reports_its_line() {
    let out = run_scenario(&scenario("scenario1", 0.9), &SimConfig { t_max: 0.05, ..SimConfig::default() }).unwrap();
    let mut lines: Vec<String> = out.log.to_csv().lines().map(str::to_string).collect();
    lines[3] = lines[3].replacen(',', ",x", 1);
    let err = TrajectoryLog::from_csv(&lines.join("\n")).unwrap_err();
    assert!(err.to_string().contains('4'), "{err}");
}

#[test]
fn longitudinal_disturbance_converges_in_dt() {
    // Decisions happen on the same epochs at both steps, so the mainline
    // response must agree to integration accuracy.
    for (qm, qv) in [(0.5, 0.5), (1.0, 0.0)] {
        let s = ScenarioDef::scenario1();
        let coarse = run_cell(&s, qm, qv, &SimConfig::default()).unwrap();
        let fine = run_cell(&s, qm, qv, &SimConfig { dt: 0.005, ..SimConfig::default() }).unwrap();
        assert!(coarse.d_long > 0.0);
        let rel = (coarse.d_long - fine.d_long).abs() / coarse.d_long;
        assert!(rel < 0.01, "q=({qm},{qv}): {} vs {}", coarse.d_long, fine.d_long);
    }
}

#[test]
fn sweep_vehicle_is_measured_against_its_preset_speed() {
    let out = run_scenario(&ScenarioDef::scenario1(), &SimConfig::default()).unwrap();
    let id = VehicleId(SWEEP_MAINLINE_ID);
    assert_eq!(longitudinal_disturbance(&out.log, id, out.preset_speed(id).unwrap()).unwrap(), 0.0);
    assert!(longitudinal_disturbance(&out.log, VehicleId(42), 20.0).is_err());
}
