//! Per-step trajectory records and their CSV form.

use std::str::FromStr;

use thiserror::Error;

use crate::geometry::LaneId;
use crate::perception::VehicleId;
use crate::planner::{AccelDirective, Maneuver};

pub const TRAJECTORY_HEADER: &str =
    "t,id,x_lat,y_long,v,theta,lane,maneuver,accel_directive,competing_id,i_col,flags";

#[derive(Debug, Error, PartialEq)]
pub enum LogParseError {
    #[error("line 1: expected header {TRAJECTORY_HEADER:?}")]
    Header,
    #[error("line {line}: expected 12 fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: bad {field} value {value:?}")]
    Field {
        line: usize,
        field: &'static str,
        value: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub forced_stop: bool,
    pub lane_change: bool,
    pub collision: bool,
}

impl Flags {
    fn render(&self) -> String {
        let mut parts = Vec::new();
        if self.forced_stop {
            parts.push("forced_stop");
        }
        if self.lane_change {
            parts.push("lane_change");
        }
        if self.collision {
            parts.push("collision");
        }
        parts.join("|")
    }

    fn parse(text: &str) -> Option<Self> {
        let mut f = Flags::default();
        for part in text.split('|').filter(|p| !p.is_empty()) {
            match part {
                "forced_stop" => f.forced_stop = true,
                "lane_change" => f.lane_change = true,
                "collision" => f.collision = true,
                _ => return None,
            }
        }
        Some(f)
    }
}

/// One vehicle at one step. Decision fields are empty for scripted vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub id: VehicleId,
    pub x_lat: f64,
    pub y_long: f64,
    pub v: f64,
    pub theta: f64,
    pub lane: LaneId,
    pub maneuver: Option<Maneuver>,
    pub accel_directive: Option<AccelDirective>,
    pub competing: Option<VehicleId>,
    /// Largest collision index against any other vehicle (true rectangles).
    pub i_col: f64,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryLog {
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn rows_for(&self, id: VehicleId) -> impl Iterator<Item = &LogRow> + '_ {
        self.rows.iter().filter(move |r| r.id == id)
    }

    pub fn ids(&self) -> Vec<VehicleId> {
        let mut ids: Vec<_> = self.rows.iter().map(|r| r.id).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::with_capacity(self.rows.len() * 96 + 128));
        let write = |w: &mut csv::Writer<Vec<u8>>, fields: &[&str]| {
            w.write_record(fields).expect("writing to memory cannot fail");
        };
        write(&mut w, &TRAJECTORY_HEADER.split(',').collect::<Vec<_>>());
        for r in &self.rows {
            let fields = [
                format!("{:.4}", r.t),
                r.id.0.to_string(),
                format!("{:.4}", r.x_lat),
                format!("{:.4}", r.y_long),
                format!("{:.4}", r.v),
                format!("{:.6}", r.theta),
                r.lane.number().to_string(),
                r.maneuver.map_or("", |m| m.as_str()).to_string(),
                r.accel_directive.map_or("", |d| d.as_str()).to_string(),
                r.competing.map(|c| c.0.to_string()).unwrap_or_default(),
                format!("{:.6}", r.i_col),
                r.flags.render(),
            ];
            write(&mut w, &fields.iter().map(String::as_str).collect::<Vec<_>>());
        }
        let bytes = w.into_inner().expect("flushing to memory cannot fail");
        String::from_utf8(bytes).expect("all fields are UTF-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, LogParseError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(text.as_bytes());
        let header_ok = reader
            .headers()
            .map(|h| h.iter().collect::<Vec<_>>().join(",") == TRAJECTORY_HEADER)
            .unwrap_or(false);
        if !header_ok {
            return Err(LogParseError::Header);
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| LogParseError::Malformed {
                line: e.position().map_or(0, |p| p.line() as usize),
                reason: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() == 1 && record[0].trim().is_empty() {
                continue;
            }
            if record.len() != 12 {
                return Err(LogParseError::FieldCount {
                    line,
                    found: record.len(),
                });
            }
            rows.push(parse_row(&record, line)?);
        }
        Ok(Self { rows })
    }
}

fn parse_row(fields: &csv::StringRecord, line: usize) -> Result<LogRow, LogParseError> {
    let bad = |field: &'static str, value: &str| LogParseError::Field {
        line,
        field,
        value: value.to_string(),
    };
    fn num<T: FromStr>(s: &str) -> Option<T> {
        s.parse().ok()
    }
    let float = |field: &'static str, s: &str| -> Result<f64, LogParseError> {
        num::<f64>(s).filter(|v| v.is_finite()).ok_or_else(|| bad(field, s))
    };
    let lane: usize = num(&fields[6])
        .filter(|n| *n >= 1)
        .ok_or_else(|| bad("lane", &fields[6]))?;
    let maneuver = match &fields[7] {
        "" => None,
        "stay" => Some(Maneuver::Stay),
        "merge" => Some(Maneuver::MergeNow),
        "change" => Some(Maneuver::ChangeLane),
        other => return Err(bad("maneuver", other)),
    };
    let accel_directive = match &fields[8] {
        "" => None,
        "hold" => Some(AccelDirective::Hold),
        "accelerate" => Some(AccelDirective::Accelerate),
        "decelerate" => Some(AccelDirective::Decelerate),
        other => return Err(bad("accel_directive", other)),
    };
    let competing = match &fields[9] {
        "" => None,
        s => Some(VehicleId(num(s).ok_or_else(|| bad("competing_id", s))?)),
    };
    Ok(LogRow {
        t: float("t", &fields[0])?,
        id: VehicleId(num(&fields[1]).ok_or_else(|| bad("id", &fields[1]))?),
        x_lat: float("x_lat", &fields[2])?,
        y_long: float("y_long", &fields[3])?,
        v: float("v", &fields[4])?,
        theta: float("theta", &fields[5])?,
        lane: LaneId(lane - 1),
        maneuver,
        accel_directive,
        competing,
        i_col: float("i_col", &fields[10])?,
        flags: Flags::parse(fields[11].trim_end()).ok_or_else(|| bad("flags", &fields[11]))?,
    })
}
