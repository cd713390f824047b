//! Phase-plane SVG of trajectory files: one dashed reference polyline and
//! one solid plant polyline per file, over the first two state coordinates.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use qsmpc::io::TrajectoryTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    /// Smallest square-ish box around every plotted point, padded by 5%.
    pub fn fit(tables: &[TrajectoryTable]) -> Self {
        let mut b = Bounds {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for t in tables {
            for r in &t.rows {
                for x in [&r.x_q, &r.x_ref] {
                    b.x_min = b.x_min.min(x[0]);
                    b.x_max = b.x_max.max(x[0]);
                    b.y_min = b.y_min.min(x[1]);
                    b.y_max = b.y_max.max(x[1]);
                }
            }
        }
        let span = (b.x_max - b.x_min).max(b.y_max - b.y_min).max(1e-9);
        let pad = 0.05 * span;
        Bounds {
            x_min: b.x_min - pad,
            x_max: b.x_max + pad,
            y_min: b.y_min - pad,
            y_max: b.y_max + pad,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.x_max - self.x_min);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.y_max - self.y_min);
        (MARGIN + (x - self.x_min) * sx, HEIGHT - MARGIN - (y - self.y_min) * sy)
    }
}

fn polyline(out: &mut String, bounds: &Bounds, pts: impl Iterator<Item = (f64, f64)>, class: &str) {
    let coords: Vec<String> = pts
        .map(|(x, y)| {
            let (px, py) = bounds.map(x, y);
            format!("{px:.2},{py:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline class="{class}" points="{}"/>"#, coords.join(" "));
}

pub fn render(tables: &[TrajectoryTable], bounds: Option<Bounds>) -> Result<String> {
    if tables.is_empty() {
        bail!("no trajectories to plot");
    }
    for t in tables {
        if t.n < 2 {
            bail!("phase-plane plots need at least two state coordinates");
        }
        if t.rows.len() < 2 {
            bail!("trajectory has fewer than two rows");
        }
    }
    let b = bounds.unwrap_or_else(|| Bounds::fit(tables));
    if !(b.x_max > b.x_min && b.y_max > b.y_min) {
        bail!("empty plot bounds");
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    s.push_str(
        "<style>\
         .reference{fill:none;stroke:#1f77b4;stroke-width:1.5;stroke-dasharray:6 4}\
         .plant{fill:none;stroke:#d62728;stroke-width:1.5}\
         .axis{stroke:#888;stroke-width:1}\
         </style>\n",
    );
    let _ = writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);
    if b.x_min <= 0.0 && b.x_max >= 0.0 {
        let (x0, top) = b.map(0.0, b.y_max);
        let (_, bottom) = b.map(0.0, b.y_min);
        let _ = writeln!(s, r#"<line class="axis" x1="{x0:.2}" y1="{top:.2}" x2="{x0:.2}" y2="{bottom:.2}"/>"#);
    }
    if b.y_min <= 0.0 && b.y_max >= 0.0 {
        let (left, y0) = b.map(b.x_min, 0.0);
        let (right, _) = b.map(b.x_max, 0.0);
        let _ = writeln!(s, r#"<line class="axis" x1="{left:.2}" y1="{y0:.2}" x2="{right:.2}" y2="{y0:.2}"/>"#);
    }
    for t in tables {
        polyline(&mut s, &b, t.rows.iter().map(|r| (r.x_ref[0], r.x_ref[1])), "reference");
        polyline(&mut s, &b, t.rows.iter().map(|r| (r.x_q[0], r.x_q[1])), "plant");
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qsmpc::io::TrajectoryRow;

    fn table(points: &[([f64; 2], [f64; 2])]) -> TrajectoryTable {
        TrajectoryTable {
            n: 2,
            m: 1,
            rows: points
                .iter()
                .enumerate()
                .map(|(k, (q, r))| TrajectoryRow {
                    k,
                    x_q: q.to_vec(),
                    x_ref: r.to_vec(),
                    u: None,
                    cost: None,
                    solve_ms: None,
                })
                .collect(),
        }
    }

    #[test]
    fn two_point_trajectory() {
        let svg = render(&[table(&[([1.0, 0.0], [2.0, 0.0]), ([0.8, 0.1], [1.9, -0.3])])], None).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
            assert_eq!(line.split("points=\"").nth(1).unwrap().split(' ').count(), 2);
        }
    }

    #[test]
    fn deterministic_and_counts_series() {
        let t = table(&[([1.0, 0.0], [2.0, 0.0]), ([0.5, 0.5], [1.0, 1.0]), ([0.0, 0.0], [0.0, 0.0])]);
        let tables = vec![t.clone(), t.clone(), t];
        let a = render(&tables, None).unwrap();
        assert_eq!(a, render(&tables, None).unwrap());
        assert_eq!(a.matches(r#"class="reference""#).count(), 3);
        assert_eq!(a.matches(r#"class="plant""#).count(), 3);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(render(&[], None).is_err());
        assert!(render(&[table(&[([0.0, 0.0], [0.0, 0.0])])], None).is_err());
    }

    #[test]
    fn explicit_bounds_map_corners() {
        let b = Bounds { x_min: -1.0, x_max: 1.0, y_min: -1.0, y_max: 1.0 };
        assert_eq!(b.map(-1.0, -1.0), (MARGIN, HEIGHT - MARGIN));
        assert_eq!(b.map(1.0, 1.0), (WIDTH - MARGIN, MARGIN));
    }
}
