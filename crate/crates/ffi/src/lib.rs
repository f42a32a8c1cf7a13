//! C ABI over `merge_sim`.
//!
//! Every fallible function returns an [`MsStatus`]; on failure the message is
//! available from [`ms_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use merge_sim::config::SimConfig;
use merge_sim::game::{solve_stackelberg, Action, PayoffBimatrix};
use merge_sim::perception::{collision_index, OrientedRect, VehicleId};
use merge_sim::sim::{run_scenario, RunOutcome, ScenarioDef};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Config = 4,
    Scenario = 5,
    Simulation = 6,
    NotFound = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsAction {
    Left = 0,
    Straight = 1,
}

impl From<Action> for MsAction {
    fn from(a: Action) -> Self {
        match a {
            Action::Left => MsAction::Left,
            Action::Straight => MsAction::Straight,
        }
    }
}

/// Vehicle footprint in the road frame: lateral and longitudinal center (m),
/// heading from the road axis (rad) and half extents (m).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsRect {
    pub x_lat: f64,
    pub y_long: f64,
    pub heading: f64,
    pub half_width: f64,
    pub half_length: f64,
}

pub struct MsConfig(SimConfig);
pub struct MsScenario(ScenarioDef);
pub struct MsOutcome(RunOutcome);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: MsStatus, msg: impl Into<String>) -> MsStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning a panic into [`MsStatus::Panic`] instead of unwinding
/// across the C boundary.
fn guard(f: impl FnOnce() -> MsStatus) -> MsStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(MsStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MsStatus> {
    if p.is_null() {
        return Err(fail(MsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> MsStatus {
    *out = Box::into_raw(Box::new(value));
    MsStatus::Ok
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(MsStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ms_config_default(out: *mut *mut MsConfig) -> MsStatus {
    non_null!(out);
    guard(|| emit(out, MsConfig(SimConfig::default())))
}

/// Parses a TOML configuration; absent keys take their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_config_from_toml(toml: *const c_char, out: *mut *mut MsConfig) -> MsStatus {
    non_null!(out);
    guard(|| {
        let text = match str_arg(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match SimConfig::from_toml(text) {
            Ok(cfg) => emit(out, MsConfig(cfg)),
            Err(e) => fail(MsStatus::Config, e.to_string()),
        }
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_config_set_seed(config: *mut MsConfig, seed: u64) -> MsStatus {
    non_null!(config);
    (*config).0.seed = seed;
    MsStatus::Ok
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_config_free(config: *mut MsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Loads `"scenario1"` or `"scenario2"`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_scenario_builtin(name: *const c_char, out: *mut *mut MsScenario) -> MsStatus {
    non_null!(out);
    guard(|| {
        let name = match str_arg(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioDef::builtin(name) {
            Ok(s) => emit(out, MsScenario(s)),
            Err(e) => fail(MsStatus::Scenario, e.to_string()),
        }
    })
}

/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_scenario_from_toml(toml: *const c_char, out: *mut *mut MsScenario) -> MsStatus {
    non_null!(out);
    guard(|| {
        let text = match str_arg(toml, "toml") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ScenarioDef::from_toml(text) {
            Ok(s) => emit(out, MsScenario(s)),
            Err(e) => fail(MsStatus::Scenario, e.to_string()),
        }
    })
}

/// Sets the aggressiveness of a decision vehicle, addressed by name or id.
///
/// # Safety
/// `scenario` must be a live handle; `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ms_scenario_set_q(scenario: *mut MsScenario, key: *const c_char, q: f64) -> MsStatus {
    non_null!(scenario);
    guard(|| {
        let key = match str_arg(key, "key") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match (*scenario).0.set_q(key, q) {
            Ok(()) => MsStatus::Ok,
            Err(e) => fail(MsStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_scenario_free(scenario: *mut MsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates `scenario` to completion. A collision is a normal outcome, not
/// an error; query it with [`ms_outcome_collided`].
///
/// # Safety
/// `scenario` and `config` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_run(
    scenario: *const MsScenario,
    config: *const MsConfig,
    out: *mut *mut MsOutcome,
) -> MsStatus {
    non_null!(scenario, config, out);
    guard(|| match run_scenario(&(*scenario).0, &(*config).0) {
        Ok(o) => emit(out, MsOutcome(o)),
        Err(e) => fail(MsStatus::Simulation, e.to_string()),
    })
}

/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_collided(outcome: *const MsOutcome, out: *mut bool) -> MsStatus {
    non_null!(outcome, out);
    *out = (*outcome).0.collided();
    MsStatus::Ok
}

/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_forced_stop(outcome: *const MsOutcome, out: *mut bool) -> MsStatus {
    non_null!(outcome, out);
    *out = (*outcome).0.forced_stop;
    MsStatus::Ok
}

/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_end_time(outcome: *const MsOutcome, out: *mut f64) -> MsStatus {
    non_null!(outcome, out);
    *out = (*outcome).0.end_time;
    MsStatus::Ok
}

/// Time vehicle `id` entered the mainline; [`MsStatus::NotFound`] if it never
/// merged.
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_merge_time(outcome: *const MsOutcome, id: u32, out: *mut f64) -> MsStatus {
    non_null!(outcome, out);
    match (*outcome).0.merge_time(VehicleId(id)) {
        Some(t) => {
            *out = t;
            MsStatus::Ok
        }
        None => fail(MsStatus::NotFound, format!("vehicle {id} did not merge")),
    }
}

/// The trajectory log as CSV; free the result with [`ms_string_free`].
///
/// # Safety
/// `outcome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_trajectory_csv(outcome: *const MsOutcome, out: *mut *mut c_char) -> MsStatus {
    non_null!(outcome, out);
    guard(|| match CString::new((*outcome).0.log.to_csv()) {
        Ok(s) => {
            *out = s.into_raw();
            MsStatus::Ok
        }
        Err(_) => fail(MsStatus::Panic, "log contains NUL"),
    })
}

/// # Safety
/// `outcome` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_outcome_free(outcome: *mut MsOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// Solves a 2×2 leader/follower game. Payoffs are row-major with rows the
/// leader's move and columns the follower's, each ordered (Left, Straight).
///
/// # Safety
/// `leader` and `follower` must each point to 4 doubles; outputs must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ms_solve_stackelberg(
    leader: *const f64,
    follower: *const f64,
    out_leader: *mut MsAction,
    out_follower: *mut MsAction,
) -> MsStatus {
    non_null!(leader, follower, out_leader, out_follower);
    let (u1, u2) = (std::slice::from_raw_parts(leader, 4), std::slice::from_raw_parts(follower, 4));
    let idx = |a: Action| match a {
        Action::Left => 0,
        Action::Straight => 1,
    };
    let m = PayoffBimatrix::from_fn(|p| {
        let k = 2 * idx(p.leader) + idx(p.follower);
        (u1[k], u2[k])
    });
    if !m.is_finite() {
        return fail(MsStatus::InvalidArgument, "payoffs must be finite");
    }
    let sol = solve_stackelberg(&m);
    *out_leader = sol.actions.leader.into();
    *out_follower = sol.actions.follower.into();
    MsStatus::Ok
}

/// Collision-possibility index of two footprints, in [0, 1].
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ms_collision_index(a: *const MsRect, b: *const MsRect, out: *mut f64) -> MsStatus {
    non_null!(a, b, out);
    let rect = |r: &MsRect| OrientedRect {
        center: [r.x_lat, r.y_long],
        heading: r.heading,
        half_width: r.half_width,
        half_length: r.half_length,
    };
    let (a, b) = (&*a, &*b);
    if ![a.x_lat, a.y_long, a.heading, b.x_lat, b.y_long, b.heading].iter().all(|v| v.is_finite())
        || !(a.half_width > 0.0 && a.half_length > 0.0 && b.half_width > 0.0 && b.half_length > 0.0)
    {
        return fail(MsStatus::InvalidArgument, "rectangles need finite poses and positive extents");
    }
    *out = collision_index(&rect(a), &rect(b));
    MsStatus::Ok
}
