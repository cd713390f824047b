//! CSV persistence for trajectories and datasets.
//!
//! Trajectory files hold `K + 1` rows: one per applied step and a final row
//! with the terminal states whose input, cost and timing cells are empty.
//! Floats are written in shortest round-trip form so reruns are
//! byte-identical.

use std::io::{Read, Write};

use crate::classifier::{Dataset, DatasetRow};
use crate::emulator::TrajectoryLog;
use crate::error::{Error, Result};

pub fn trajectory_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((0..n).map(|i| format!("xq_{i}")));
    h.extend((0..n).map(|i| format!("xref_{i}")));
    h.extend((0..m).map(|i| format!("u_{i}")));
    h.push("J".into());
    h.push("solve_ms".into());
    h
}

/// Writes a trajectory. Solve times are written as 0 unless `with_timing`.
pub fn write_trajectory<W: Write>(log: &TrajectoryLog, out: W, with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(log.n, log.m))?;
    for r in &log.records {
        let mut row: Vec<String> = vec![r.k.to_string()];
        row.extend(r.x_q.iter().chain(&r.x_ref).map(f64::to_string));
        row.extend(r.u.entries().iter().map(i8::to_string));
        row.push(r.cost.to_string());
        let ms = if with_timing { r.solve_time.as_secs_f64() * 1e3 } else { 0.0 };
        row.push(ms.to_string());
        w.write_record(&row)?;
    }
    let mut last: Vec<String> = vec![log.records.len().to_string()];
    last.extend(log.final_x_q.iter().chain(&log.final_x_ref).map(f64::to_string));
    last.extend(std::iter::repeat_n(String::new(), log.m + 2));
    w.write_record(&last)?;
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub x_q: Vec<f64>,
    pub x_ref: Vec<f64>,
    /// Empty on the terminal row.
    pub u: Option<Vec<i8>>,
    pub cost: Option<f64>,
    pub solve_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<TrajectoryRow>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_opt<T: std::str::FromStr>(cell: &str, what: &str, line: usize) -> Result<Option<T>> {
    if cell.trim().is_empty() {
        return Ok(None);
    }
    cell.trim()
        .parse()
        .map(Some)
        .map_err(|_| bad(format!("line {line}: cannot parse {what} from {cell:?}")))
}

fn parse_req<T: std::str::FromStr>(cell: &str, what: &str, line: usize) -> Result<T> {
    parse_opt(cell, what, line)?.ok_or_else(|| bad(format!("line {line}: missing {what}")))
}

/// Reads a trajectory file, checking the header layout and that `k` counts
/// up from 0 without gaps.
pub fn read_trajectory<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n = header.iter().filter(|h| h.starts_with("xq_")).count();
    let m = header.iter().filter(|h| h.starts_with("u_")).count();
    if n == 0 || header != trajectory_header(n, m) {
        return Err(bad(format!("unexpected trajectory header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let k: usize = parse_req(cell(0), "k", line)?;
        if k != rows.len() {
            return Err(bad(format!("line {line}: step index {k}, expected {}", rows.len())));
        }
        let floats = |from: usize, what: &str| -> Result<Vec<f64>> {
            (from..from + n).map(|j| parse_req(cell(j), what, line)).collect()
        };
        let x_q = floats(1, "plant state")?;
        let x_ref = floats(1 + n, "reference state")?;
        let u_cells: Vec<Option<i8>> = (0..m).map(|j| parse_opt(cell(1 + 2 * n + j), "input", line)).collect::<Result<_>>()?;
        let u = if u_cells.iter().all(Option::is_none) && m > 0 {
            None
        } else {
            Some(
                u_cells
                    .into_iter()
                    .map(|v| v.ok_or_else(|| bad(format!("line {line}: partially empty input"))))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        rows.push(TrajectoryRow {
            k,
            x_q,
            x_ref,
            u,
            cost: parse_opt(cell(1 + 2 * n + m), "J", line)?,
            solve_ms: parse_opt(cell(2 + 2 * n + m), "solve_ms", line)?,
        });
    }
    Ok(TrajectoryTable { n, m, rows })
}

pub fn dataset_header(feature_dim: usize) -> Vec<String> {
    let mut h: Vec<String> = (0..feature_dim).map(|i| format!("f_{i}")).collect();
    h.push("label".into());
    h
}

pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header(data.feature_dim()))?;
    for r in data.rows() {
        let mut row: Vec<String> = r.features.iter().map(f64::to_string).collect();
        row.push(r.label.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset; `classes` bounds the labels.
pub fn read_dataset<R: Read>(input: R, classes: usize) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let dim = header.len().saturating_sub(1);
    if dim == 0 || header != dataset_header(dim) {
        return Err(bad(format!("unexpected dataset header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let features = (0..dim)
            .map(|j| parse_req(rec.get(j).unwrap_or(""), "feature", line))
            .collect::<Result<Vec<f64>>>()?;
        let label = parse_req(rec.get(dim).unwrap_or(""), "label", line)?;
        rows.push(DatasetRow { features, label });
    }
    Dataset::new(rows, classes)
}
