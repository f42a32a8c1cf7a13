use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use merge_sim::config::SimConfig;
use merge_sim::metrics::GRID_HEADER;

fn merge_sim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_merge-sim"))
        .args(args)
        .current_dir(dir)
        .env_remove("MERGE_SIM_SEED")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, out: &str) -> toml::Table {
    fs::read_to_string(dir.join(out).join("summary.toml"))
        .unwrap()
        .parse()
        .unwrap()
}

fn merger(table: &toml::Table) -> &toml::Table {
    table["vehicles"].as_array().unwrap()[0].as_table().unwrap()
}

#[test]
fn aggressive_merger_passes_vehicle_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = merge_sim(tmp.path(), &["run", "--scenario", "scenario1", "--q", "merging=0.9", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(tmp.path(), "o");
    assert_eq!(merger(&s)["merged_ahead_of"].as_integer(), Some(4));
    assert_eq!(s["collision"].as_bool(), Some(false));
    let csv = fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,id,x_lat,y_long,v,theta,lane,maneuver,accel_directive,competing_id,i_col,flags\n"));
}

#[test]
fn cautious_merger_ends_in_middle_lane_and_flags_forced_stop() {
    let tmp = tempfile::tempdir().unwrap();
    let out = merge_sim(tmp.path(), &["run", "--scenario", "scenario1", "--q", "6=0.1", "--out", "o"]);
    // The cautious driver brakes hard at the end of the entrance.
    assert_eq!(out.status.code(), Some(4));
    let s = summary(tmp.path(), "o");
    let m = merger(&s);
    assert_eq!(m["final_lane"].as_integer(), Some(2));
    assert_eq!(m["merged_behind"].as_integer(), Some(5));
    assert_eq!(s["forced_stop"].as_bool(), Some(true));
}

#[test]
fn bad_config_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--dt", "0", "--out", "o"][..],
        &["run", "--epoch", "0.015", "--out", "o"],
        &["run", "--scenario", "nowhere", "--out", "o"],
        &["run", "--q", "merging=1.5", "--out", "o"],
        &["run", "--q", "3=0.5", "--out", "o"],
        &["run", "--q", "merging", "--out", "o"],
    ] {
        let out = merge_sim(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert!(!tmp.path().join("o").exists());

    let bad = Command::new(env!("CARGO_BIN_EXE_merge-sim"))
        .args(["run", "--out", "o"])
        .current_dir(tmp.path())
        .env("MERGE_SIM_SEED", "minus one")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn dump_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = merge_sim(tmp.path(), &["run", "--dump-config", "--dt", "0.005", "--seed", "9"]);
    assert!(out.status.success());
    let cfg = SimConfig::from_toml(&String::from_utf8(out.stdout.clone()).unwrap()).unwrap();
    assert_eq!(cfg.dt, 0.005);
    assert_eq!(cfg.seed, 9);
    assert!(!tmp.path().join("out").exists());

    fs::write(tmp.path().join("c.toml"), &out.stdout).unwrap();
    let again = merge_sim(tmp.path(), &["dump-config", "--config", "c.toml"]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn seed_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_merge-sim"))
        .args(["dump-config"])
        .env("MERGE_SIM_SEED", "1234")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    let cfg = SimConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 1234);
}

#[test]
fn sweep_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = merge_sim(tmp.path(), &["sweep", "--grid", "0:1:0.5", "--jobs", "2", "--out", "g.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("g.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(GRID_HEADER));
    assert_eq!(GRID_HEADER, "q_merge,q_mainline,d_long_m,d_lat_m,lane_changes,collision,forced_stop,seed");
    assert_eq!(lines.count(), 9);

    for bad in ["1:0:0.5", "0:1", "0:1:-0.1", "0:1.5:0.5"] {
        let out = merge_sim(tmp.path(), &["sweep", "--grid", bad, "--out", "bad.csv"]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    assert!(!tmp.path().join("bad.csv").exists());
}

#[test]
fn plot_draws_every_vehicle_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    merge_sim(dir, &["run", "--q", "merging=0.5", "--out", "o"]);
    for svg in ["a.svg", "b.svg"] {
        let out = merge_sim(dir, &["plot", "o/trajectory.csv", "--out", svg]);
        assert!(out.status.success());
    }
    let a = fs::read_to_string(dir.join("a.svg")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.join("b.svg")).unwrap());
    assert_eq!(a.matches("<polyline").count(), 6);

    fs::write(dir.join("empty.csv"), "t,id,x_lat,y_long,v,theta,lane,maneuver,accel_directive,competing_id,i_col,flags\n").unwrap();
    assert!(merge_sim(dir, &["plot", "empty.csv"]).status.success());
    let empty = fs::read_to_string(dir.join("empty.svg")).unwrap();
    assert!(empty.contains("<line") && !empty.contains("<polyline"));

    fs::write(dir.join("broken.csv"), "t,id,x_lat,y_long,v,theta,lane,maneuver,accel_directive,competing_id,i_col,flags\n0.0,1,zero\n").unwrap();
    let out = merge_sim(dir, &["plot", "broken.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scenario_file_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let text = merge_sim::sim::ScenarioDef::scenario2().to_toml().unwrap();
    fs::write(tmp.path().join("s.toml"), text).unwrap();
    let out = merge_sim(tmp.path(), &["run", "--scenario", "s.toml", "--t-max", "3", "--out", "o"]);
    assert!(out.status.code().is_some_and(|c| c == 0 || c == 4));
    assert!(tmp.path().join("o/trajectory.csv").exists());
}
