//! Static SVG of lateral versus longitudinal position, one polyline per
//! vehicle, over the lane layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::geometry::LaneGeometry;
use crate::perception::VehicleId;
use crate::sim::TrajectoryLog;

const WIDTH: f64 = 1200.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    y0: f64,
    y1: f64,
    x0: f64,
    x1: f64,
}

impl Frame {
    /// Longitudinal position runs left to right; lane 1 is drawn at the top.
    fn map(&self, x_lat: f64, y_long: f64) -> (f64, f64) {
        let px = MARGIN + (y_long - self.y0) / (self.y1 - self.y0) * (WIDTH - 2.0 * MARGIN);
        let py = MARGIN + (x_lat - self.x0) / (self.x1 - self.x0) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    }
}

fn line(out: &mut String, (ax, ay): (f64, f64), (bx, by): (f64, f64), style: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" {style}/>"#
    );
}

pub fn render_svg(log: &TrajectoryLog, geometry: &LaneGeometry) -> String {
    let half = geometry.lane_width / 2.0;
    let first = geometry.lane_centers.first().copied().unwrap_or(0.0);
    let last = geometry.lane_centers.last().copied().unwrap_or(0.0);
    let (mut y0, mut y1) = (geometry.merge.start.min(0.0), geometry.hard_end() + 20.0);
    for r in &log.rows {
        y0 = y0.min(r.y_long);
        y1 = y1.max(r.y_long);
    }
    let frame = Frame {
        y0,
        y1,
        x0: first - half,
        x1: last + half,
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // Mainline edges and dashed lane separators over the whole frame.
    let solid = r##"stroke="#444" stroke-width="1.5""##;
    let dashed = r##"stroke="#999" stroke-width="1" stroke-dasharray="8 6""##;
    let mainline = geometry.lane_count() - 1;
    for k in 0..=mainline {
        let x = first - half + k as f64 * geometry.lane_width;
        let style = if k == 0 || k == mainline { solid } else { dashed };
        let (from, to) = if k == mainline { (y0, geometry.merge.start) } else { (y0, y1) };
        line(&mut out, frame.map(x, from), frame.map(x, to), style);
        if k == mainline {
            line(&mut out, frame.map(x, geometry.merge.start), frame.map(x, geometry.entrance_end()), dashed);
            line(&mut out, frame.map(x, geometry.entrance_end()), frame.map(x, y1), solid);
        }
    }
    // Merge lane: outer edge and the hard end.
    let outer = last + half;
    line(&mut out, frame.map(outer, geometry.merge.start), frame.map(outer, geometry.hard_end()), solid);
    line(
        &mut out,
        frame.map(outer - geometry.lane_width, geometry.hard_end()),
        frame.map(outer, geometry.hard_end()),
        solid,
    );

    let mut tracks: BTreeMap<VehicleId, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &log.rows {
        tracks.entry(r.id).or_default().push(frame.map(r.x_lat, r.y_long));
    }
    for (k, (id, points)) in tracks.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let _ = write!(out, r#"<polyline data-id="{}" fill="none" stroke="{color}" stroke-width="2" points=""#, id.0);
        for (i, (px, py)) in points.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{px:.2},{py:.2}");
        }
        out.push_str("\"/>\n");
        if let Some(&(px, py)) = points.last() {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                px + 4.0,
                py - 4.0,
                id.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
