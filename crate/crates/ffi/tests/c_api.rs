use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use merge_sim_ffi::*;

fn last_error() -> String {
    let p = ms_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn run_builtin_scenario() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ms_config_default(&mut cfg), MsStatus::Ok);
        let mut scen = ptr::null_mut();
        let name = CString::new("scenario1").unwrap();
        assert_eq!(ms_scenario_builtin(name.as_ptr(), &mut scen), MsStatus::Ok);
        let key = CString::new("merging").unwrap();
        assert_eq!(ms_scenario_set_q(scen, key.as_ptr(), 0.9), MsStatus::Ok);

        let mut outcome = ptr::null_mut();
        assert_eq!(ms_run(scen, cfg, &mut outcome), MsStatus::Ok);
        let mut collided = true;
        assert_eq!(ms_outcome_collided(outcome, &mut collided), MsStatus::Ok);
        assert!(!collided);
        let mut t = 0.0;
        assert_eq!(ms_outcome_merge_time(outcome, 6, &mut t), MsStatus::Ok);
        assert!(t > 0.0 && t < 10.0, "{t}");
        assert_eq!(ms_outcome_merge_time(outcome, 4, &mut t), MsStatus::NotFound);
        assert!(last_error().contains("did not merge"));

        let mut csv = ptr::null_mut();
        assert_eq!(ms_outcome_trajectory_csv(outcome, &mut csv), MsStatus::Ok);
        let text = CStr::from_ptr(csv).to_str().unwrap();
        assert!(text.starts_with("t,"));
        ms_string_free(csv);

        ms_outcome_free(outcome);
        ms_scenario_free(scen);
        ms_config_free(cfg);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut cfg = ptr::null_mut();
        let bad = CString::new("dt = -1.0").unwrap();
        assert_eq!(ms_config_from_toml(bad.as_ptr(), &mut cfg), MsStatus::Config);
        assert!(cfg.is_null());
        assert!(last_error().contains("dt"));

        let mut scen = ptr::null_mut();
        assert_eq!(ms_scenario_builtin(ptr::null(), &mut scen), MsStatus::NullPointer);
        let name = CString::new("scenario9").unwrap();
        assert_eq!(ms_scenario_builtin(name.as_ptr(), &mut scen), MsStatus::Scenario);

        let name = CString::new("scenario2").unwrap();
        assert_eq!(ms_scenario_builtin(name.as_ptr(), &mut scen), MsStatus::Ok);
        let key = CString::new("1").unwrap();
        // Vehicle 1 is scripted.
        assert_eq!(ms_scenario_set_q(scen, key.as_ptr(), 0.5), MsStatus::InvalidArgument);
        let key = CString::new("merging").unwrap();
        assert_eq!(ms_scenario_set_q(scen, key.as_ptr(), 1.5), MsStatus::InvalidArgument);
        ms_scenario_free(scen);

        assert_eq!(ms_run(ptr::null(), ptr::null(), ptr::null_mut()), MsStatus::NullPointer);
        ms_config_free(ptr::null_mut());
        ms_outcome_free(ptr::null_mut());
    }
}

#[test]
fn stackelberg_and_collision_index() {
    // Prisoner's-dilemma-like game: follower always plays Straight, so the
    // leader's best secure move is Left (3 > 1).
    let u1 = [0.0, 3.0, -1.0, 1.0];
    let u2 = [0.0, 2.0, 0.0, 1.0];
    let (mut l, mut f) = (MsAction::Straight, MsAction::Left);
    unsafe {
        assert_eq!(ms_solve_stackelberg(u1.as_ptr(), u2.as_ptr(), &mut l, &mut f), MsStatus::Ok);
    }
    assert_eq!((l, f), (MsAction::Left, MsAction::Straight));

    let a = MsRect {
        x_lat: 0.0,
        y_long: 0.0,
        heading: 0.0,
        half_width: 1.0,
        half_length: 2.0,
    };
    let b = MsRect { y_long: 9.0, ..a };
    let mut i = 0.0;
    unsafe {
        assert_eq!(ms_collision_index(&a, &a, &mut i), MsStatus::Ok);
        assert_eq!(i, 1.0);
        assert_eq!(ms_collision_index(&a, &b, &mut i), MsStatus::Ok);
        // Gap 5 m on both rectangles' longitudinal axes.
        assert!((i - (-5.0f64).exp()).abs() < 1e-12);
        let bad = MsRect { half_width: 0.0, ..a };
        assert_eq!(ms_collision_index(&a, &bad, &mut i), MsStatus::InvalidArgument);
    }
}

#[test]
fn header_declares_every_export() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/merge_sim.h")).unwrap();
    let source = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in ["typedef struct MsConfig MsConfig;", "MS_STATUS_OK = 0", "MS_STATUS_PANIC = 99"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Ok(status) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(dir.join("include/merge_sim.h"))
        .status()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(status.success());
}
