//! File formats of run artifacts.
//!
//! * histories: `epoch,phase,loss,grad_norm,step_size`
//! * slices: a header row `x2,<x1 coordinates>`, then one row per `x₂` with
//!   the coordinate first; cells outside the domain are empty
//! * checkpoints: `dims,<d0>,<d1>,...` then one `index,value` row per
//!   parameter, layer-major with each weight matrix row-major (`out x in`)
//!   followed by its biases
//! * samples: `x,y,z` for interior points, `x,y,z,nx,ny,nz` on the boundary
//!
//! Floats are written in shortest round-trip form.

use std::fs::File;
use std::path::Path;

use dvnn_core::bench::SliceField;
use dvnn_core::geometry::{Domain, SampleSet};
use dvnn_core::networks::MlpParams;
use dvnn_core::solver::{HistoryRow, Phase};
use dvnn_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

fn writer(path: &Path) -> AppResult<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(AppError::csv(path))
}

fn reader(path: &Path) -> AppResult<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(AppError::csv(path))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> AppResult<()> {
    w.flush().map_err(AppError::io(path))
}

fn bad(path: &Path, msg: impl Into<String>) -> AppError {
    AppError::usage(format!("{}: {}", path.display(), msg.into()))
}

fn parse_f64(path: &Path, s: &str) -> AppResult<f64> {
    s.trim().parse().map_err(|_| bad(path, format!("not a number: `{s}`")))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct HistoryRecord {
    epoch: usize,
    phase: Phase,
    loss: f64,
    grad_norm: f64,
    step_size: f64,
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> AppResult<()> {
    let mut w = writer(path)?;
    if rows.is_empty() {
        w.write_record(["epoch", "phase", "loss", "grad_norm", "step_size"])
            .map_err(AppError::csv(path))?;
    }
    for r in rows {
        w.serialize(HistoryRecord {
            epoch: r.epoch,
            phase: r.phase,
            loss: r.loss,
            grad_norm: r.grad_norm,
            step_size: r.step_size,
        })
        .map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

pub fn read_history(path: &Path) -> AppResult<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(AppError::csv(path))?;
    r.deserialize::<HistoryRecord>()
        .map(|rec| {
            let rec = rec.map_err(AppError::csv(path))?;
            Ok(HistoryRow {
                epoch: rec.epoch,
                phase: rec.phase,
                loss: rec.loss,
                grad_norm: rec.grad_norm,
                step_size: rec.step_size,
            })
        })
        .collect()
}

pub fn write_trace(path: &Path, trace: &[(usize, f64)]) -> AppResult<()> {
    let mut w = writer(path)?;
    w.write_record(["epoch", "error"]).map_err(AppError::csv(path))?;
    for (epoch, e) in trace {
        w.write_record([epoch.to_string(), e.to_string()])
            .map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

pub fn write_slice(path: &Path, field: &SliceField) -> AppResult<()> {
    let mut w = writer(path)?;
    let header = std::iter::once("x2".to_string()).chain(field.coords.iter().map(f64::to_string));
    w.write_record(header).map_err(AppError::csv(path))?;
    let n = field.n();
    for (j, x2) in field.coords.iter().enumerate() {
        let row = std::iter::once(x2.to_string())
            .chain((0..n).map(|i| field.get(i, j).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(row).map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

pub fn read_slice(path: &Path) -> AppResult<SliceField> {
    let mut rows = reader(path)?.into_records();
    let header = rows
        .next()
        .ok_or_else(|| bad(path, "empty slice file"))?
        .map_err(AppError::csv(path))?;
    let coords = header
        .iter()
        .skip(1)
        .map(|s| parse_f64(path, s))
        .collect::<AppResult<Vec<_>>>()?;
    let n = coords.len();
    let mut values = Vec::with_capacity(n * n);
    for rec in rows {
        let rec = rec.map_err(AppError::csv(path))?;
        if rec.len() != n + 1 {
            return Err(bad(path, format!("row has {} cells, expected {}", rec.len(), n + 1)));
        }
        for cell in rec.iter().skip(1) {
            values.push(if cell.is_empty() { None } else { Some(parse_f64(path, cell)?) });
        }
    }
    if values.len() != n * n {
        return Err(bad(path, format!("expected {n} rows")));
    }
    Ok(SliceField { coords, values })
}

pub fn write_checkpoint(path: &Path, net: &MlpParams) -> AppResult<()> {
    let mut w = writer(path)?;
    let dims = std::iter::once("dims".to_string()).chain(net.dims().iter().map(usize::to_string));
    w.write_record(dims).map_err(AppError::csv(path))?;
    for (k, v) in net.flat().iter().enumerate() {
        w.write_record([k.to_string(), v.to_string()])
            .map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

pub fn read_checkpoint(path: &Path) -> AppResult<MlpParams> {
    let mut rows = reader(path)?.into_records();
    let head = rows
        .next()
        .ok_or_else(|| bad(path, "empty checkpoint"))?
        .map_err(AppError::csv(path))?;
    if head.get(0) != Some("dims") {
        return Err(bad(path, "first row must start with `dims`"));
    }
    let dims = head
        .iter()
        .skip(1)
        .map(|s| s.trim().parse::<usize>().map_err(|_| bad(path, format!("bad dimension `{s}`"))))
        .collect::<AppResult<Vec<_>>>()?;
    let mut params = Vec::new();
    for (k, rec) in rows.enumerate() {
        let rec = rec.map_err(AppError::csv(path))?;
        let idx: usize = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(path, "missing parameter index"))?;
        if idx != k {
            return Err(bad(path, format!("parameter {k} listed as {idx}")));
        }
        params.push(parse_f64(path, rec.get(1).unwrap_or(""))?);
    }
    Ok(MlpParams::from_flat(&dims, params)?)
}

fn write_points(path: &Path, pts: &[Vec3], normals: Option<&[Vec3]>) -> AppResult<()> {
    let mut w = writer(path)?;
    match normals {
        Some(_) => w.write_record(["x", "y", "z", "nx", "ny", "nz"]),
        None => w.write_record(["x", "y", "z"]),
    }
    .map_err(AppError::csv(path))?;
    for (k, x) in pts.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        if let Some(n) = normals {
            row.extend(n[k].iter().map(f64::to_string));
        }
        w.write_record(row).map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

fn read_points(path: &Path, width: usize) -> AppResult<Vec<[f64; 6]>> {
    let mut out = Vec::new();
    for (k, rec) in reader(path)?.into_records().enumerate() {
        let rec = rec.map_err(AppError::csv(path))?;
        if k == 0 {
            continue;
        }
        if rec.len() != width {
            return Err(bad(path, format!("row {k} has {} cells, expected {width}", rec.len())));
        }
        let mut row = [0.0; 6];
        for (slot, cell) in row.iter_mut().zip(rec.iter()) {
            *slot = parse_f64(path, cell)?;
        }
        out.push(row);
    }
    Ok(out)
}

/// Writes `interior.csv` and `boundary.csv` into `dir`.
pub fn write_samples(dir: &Path, s: &SampleSet) -> AppResult<()> {
    write_points(&dir.join("interior.csv"), &s.interior, None)?;
    write_points(&dir.join("boundary.csv"), &s.boundary, Some(&s.normals))
}

pub fn read_samples(dir: &Path, domain: Domain) -> AppResult<SampleSet> {
    let interior = read_points(&dir.join("interior.csv"), 3)?
        .into_iter()
        .map(|r| [r[0], r[1], r[2]])
        .collect();
    let rows = read_points(&dir.join("boundary.csv"), 6)?;
    Ok(SampleSet {
        domain,
        interior,
        boundary: rows.iter().map(|r| [r[0], r[1], r[2]]).collect(),
        normals: rows.iter().map(|r| [r[3], r[4], r[5]]).collect(),
    })
}

/// One row of the errors table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub example: String,
    pub method: String,
    pub p: Option<f64>,
    pub seed: u64,
    pub e_sigma: Option<f64>,
    pub e_u: Option<f64>,
    pub e: Option<f64>,
    pub e2: Option<f64>,
    pub e1: Option<f64>,
    /// `max |û - d(x, ∂Ω)|` on the slice, for the torsion problem.
    pub slice_deviation: Option<f64>,
    pub wall_time: Option<f64>,
}

pub fn write_errors(path: &Path, rows: &[ErrorRow]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(AppError::csv(path))?;
    for r in rows {
        w.serialize(r).map_err(AppError::csv(path))?;
    }
    finish(w, path)
}

pub fn read_errors(path: &Path) -> AppResult<Vec<ErrorRow>> {
    let mut r = csv::Reader::from_path(path).map_err(AppError::csv(path))?;
    r.deserialize()
        .map(|rec| rec.map_err(AppError::csv(path)))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(AppError::io(path))
}
