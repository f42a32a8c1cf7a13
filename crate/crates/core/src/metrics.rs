//! Mainline disturbance measures and the aggressiveness-grid sweep.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::SimConfig;
use crate::geometry::LaneGeometry;
use crate::perception::VehicleId;
use crate::sim::{run_scenario, ScenarioDef, SimError, TrajectoryLog, MERGING_ID};

pub const GRID_HEADER: &str =
    "q_merge,q_mainline,d_long_m,d_lat_m,lane_changes,collision,forced_stop,seed";

/// The adjacent-lane competitor promoted to a decision vehicle in the sweep.
pub const SWEEP_MAINLINE_ID: u32 = 4;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("vehicle {0} does not appear in the log")]
    UnknownVehicle(VehicleId),
    #[error("{axis} grid: {reason}")]
    Grid { axis: &'static str, reason: String },
    #[error("cell q_merge={q_merge}, q_mainline={q_mainline}: {source}")]
    Cell {
        q_merge: f64,
        q_mainline: f64,
        #[source]
        source: SimError,
    },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Trapezoidal integral of the speed deficit `max(v0 − v, 0)` over the run (m).
pub fn longitudinal_disturbance(log: &TrajectoryLog, id: VehicleId, v0: f64) -> Result<f64, MetricsError> {
    let samples: Vec<(f64, f64)> = log
        .rows_for(id)
        .map(|r| (r.t, (v0 - r.v).max(0.0)))
        .collect();
    if samples.is_empty() {
        return Err(MetricsError::UnknownVehicle(id));
    }
    Ok(samples
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum())
}

/// Lateral movement caused by lane changes: the lane-center offset of each
/// change that settled in a new lane, plus the peak excursion of any that
/// ended (or the run cut off) before reaching one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LateralDisturbance {
    pub d_lat: f64,
    pub completed: usize,
}

pub fn lateral_disturbance(
    log: &TrajectoryLog,
    id: VehicleId,
    geometry: &LaneGeometry,
) -> Result<LateralDisturbance, MetricsError> {
    let mut rows = log.rows_for(id).peekable();
    if rows.peek().is_none() {
        return Err(MetricsError::UnknownVehicle(id));
    }
    let mut out = LateralDisturbance::default();
    // (lane at start, x at start, peak |Δx|) of the maneuver in progress.
    let mut active = None;
    for r in rows {
        match (active, r.flags.lane_change) {
            (None, true) => active = Some((r.lane, r.x_lat, 0.0_f64)),
            (Some((lane, x0, peak)), true) => active = Some((lane, x0, peak.max((r.x_lat - x0).abs()))),
            (Some((lane, x0, peak)), false) => {
                if r.lane != lane {
                    out.d_lat += (geometry.center(r.lane) - geometry.center(lane)).abs();
                    out.completed += 1;
                } else {
                    out.d_lat += peak.max((r.x_lat - x0).abs());
                }
                active = None;
            }
            (None, false) => {}
        }
    }
    if let Some((_, _, peak)) = active {
        out.d_lat += peak;
    }
    Ok(out)
}

/// Smallest bumper-to-bumper gap from `id` to the vehicle ahead of it in the
/// same lane, over the logged samples; `None` if it never had a leader.
pub fn min_gap(log: &TrajectoryLog, id: VehicleId, length: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for chunk in log.rows.chunk_by(|a, b| a.t == b.t) {
        let Some(me) = chunk.iter().find(|r| r.id == id) else {
            continue;
        };
        let gap = chunk
            .iter()
            .filter(|r| r.id != id && r.lane == me.lane && r.y_long >= me.y_long)
            .map(|r| r.y_long - me.y_long - length)
            .reduce(f64::min);
        if let Some(g) = gap {
            best = Some(best.map_or(g, |b| b.min(g)));
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceReport {
    pub q_merge: f64,
    pub q_mainline: f64,
    pub seed: u64,
    pub d_long: f64,
    pub d_lat: f64,
    pub lane_changes: usize,
    pub collision: bool,
    pub forced_stop: bool,
}

/// One report per (q_merge, q_mainline) cell, mainline-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceGrid {
    pub q_merge: Vec<f64>,
    pub q_mainline: Vec<f64>,
    pub cells: Vec<DisturbanceReport>,
}

impl DisturbanceGrid {
    pub fn get(&self, i_merge: usize, i_mainline: usize) -> &DisturbanceReport {
        &self.cells[i_mainline * self.q_merge.len() + i_merge]
    }

    /// The row of cells sharing mainline aggressiveness index `i_mainline`.
    pub fn row(&self, i_mainline: usize) -> &[DisturbanceReport] {
        let n = self.q_merge.len();
        &self.cells[i_mainline * n..(i_mainline + 1) * n]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(GRID_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:.4},{:.4},{:.6},{:.6},{},{},{},{}",
                c.q_merge,
                c.q_mainline,
                c.d_long,
                c.d_lat,
                c.lane_changes,
                u8::from(c.collision),
                u8::from(c.forced_stop),
                c.seed
            );
        }
        out
    }
}

/// Parses `start:stop:step` into the inclusive list of grid values.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, MetricsError> {
    let bad = |reason: &str| MetricsError::Grid {
        axis: "q",
        reason: format!("{spec:?}: {reason}"),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(bad("expected start:stop:step"));
    };
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
    if !(0.0..=1.0).contains(&start) || !(0.0..=1.0).contains(&stop) {
        return Err(bad("bounds must lie in [0, 1]"));
    }
    if start > stop {
        return Err(bad("start exceeds stop"));
    }
    if !(step > 0.0) {
        return Err(bad("step must be positive"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| (start + k as f64 * step).min(stop)).collect())
}

fn validate_axis(axis: &'static str, values: &[f64]) -> Result<(), MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Grid {
            axis,
            reason: "empty".into(),
        });
    }
    if let Some(q) = values.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(MetricsError::Grid {
            axis,
            reason: format!("{q} is outside [0, 1]"),
        });
    }
    Ok(())
}

/// Runs one cell: the merging vehicle at `q_merge` against Vehicle 4 promoted
/// to a decision vehicle at `q_mainline`, and measures Vehicle 4.
pub fn run_cell(
    base: &ScenarioDef,
    q_merge: f64,
    q_mainline: f64,
    config: &SimConfig,
) -> Result<DisturbanceReport, SimError> {
    let mut scenario = base.clone();
    scenario.set_q(&MERGING_ID.to_string(), q_merge)?;
    scenario.promote(SWEEP_MAINLINE_ID, q_mainline)?;
    let outcome = run_scenario(&scenario, config)?;
    let id = VehicleId(SWEEP_MAINLINE_ID);
    let v0 = outcome.preset_speed(id).expect("promoted vehicle is present");
    // The vehicle is in the log by construction, so neither metric can fail.
    let d_long = longitudinal_disturbance(&outcome.log, id, v0).unwrap_or(0.0);
    let lateral = lateral_disturbance(&outcome.log, id, &scenario.geometry).unwrap_or_default();
    Ok(DisturbanceReport {
        q_merge,
        q_mainline,
        seed: config.seed,
        d_long,
        d_lat: lateral.d_lat,
        lane_changes: lateral.completed,
        collision: outcome.collided(),
        forced_stop: outcome.forced_stop,
    })
}

/// Sweeps every (q_merge, q_mainline) pair on `jobs` worker threads. Cells
/// are independent, so the grid does not depend on `jobs`.
pub fn aggressiveness_sweep(
    base: &ScenarioDef,
    q_merge: &[f64],
    q_mainline: &[f64],
    config: &SimConfig,
    jobs: usize,
) -> Result<DisturbanceGrid, MetricsError> {
    validate_axis("q_merge", q_merge)?;
    validate_axis("q_mainline", q_mainline)?;
    let pairs: Vec<(f64, f64)> = q_mainline
        .iter()
        .flat_map(|&m| q_merge.iter().map(move |&g| (g, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let cells = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(g, m)| {
                run_cell(base, g, m, config).map_err(|source| MetricsError::Cell {
                    q_merge: g,
                    q_mainline: m,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(DisturbanceGrid {
        q_merge: q_merge.to_vec(),
        q_mainline: q_mainline.to_vec(),
        cells,
    })
}
