//! Numeric CSV datasets: one label column, every other column a feature.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use advsvm_core::data::{RawDataset, ValueRange};

use crate::error::{AppError, AppResult, Location};

fn parse_label(cell: &str) -> Option<i64> {
    let v: f64 = cell.trim().parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Reads a CSV dataset from `reader`. A first row with any non-numeric cell
/// is treated as a header. `name` is used in error messages and provenance.
pub fn read_csv<R: Read>(reader: R, label_column: usize, name: &Path) -> AppResult<RawDataset> {
    read_inner(reader, Some(label_column), name)
}

/// Reads a CSV of feature rows only; every class is 0.
pub fn read_features<R: Read>(reader: R, name: &Path) -> AppResult<RawDataset> {
    read_inner(reader, None, name)
}

fn read_inner<R: Read>(reader: R, label_column: Option<usize>, name: &Path) -> AppResult<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut width: Option<usize> = None;
    let mut features = Vec::new();
    let mut classes = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            AppError::format(name, Location::Line(line), e.to_string())
        })?;
        let line = rec.position().map_or(k as u64 + 1, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if k == 0 && rec.iter().any(|c| c.parse::<f64>().is_err()) {
            width = Some(rec.len());
            continue;
        }
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => {
                return Err(AppError::format(
                    name,
                    Location::Line(line),
                    format!("ragged row: {} fields, expected {w}", rec.len()),
                ))
            }
            _ => {}
        }
        if let Some(label_column) = label_column.filter(|&c| c >= rec.len()) {
            return Err(AppError::format(
                name,
                Location::Line(line),
                format!("label column {label_column} out of range for {} fields", rec.len()),
            ));
        }
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_column {
                let l = parse_label(cell).ok_or_else(|| {
                    AppError::format(name, Location::Line(line), format!("label '{cell}' is not an integer"))
                })?;
                classes.push(l);
            } else {
                let v: f64 = cell.parse().map_err(|_| {
                    AppError::format(name, Location::Line(line), format!("non-numeric cell '{cell}' in column {j}"))
                })?;
                features.push(v);
            }
        }
        if label_column.is_none() {
            classes.push(0);
        }
    }
    let w = match width {
        Some(w) if !classes.is_empty() => w,
        _ => return Err(AppError::format(name, Location::File, "no data rows")),
    };
    let dim = w - usize::from(label_column.is_some());
    if dim == 0 {
        return Err(AppError::format(name, Location::File, "no feature columns"));
    }
    Ok(RawDataset::new(
        dim,
        features,
        classes,
        ValueRange::Unknown,
        name.display().to_string(),
    )?)
}

pub fn load_csv(path: &Path, label_column: usize) -> AppResult<RawDataset> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    read_csv(f, label_column, path)
}

pub fn load_features(path: &Path) -> AppResult<RawDataset> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    read_features(f, path)
}

/// Writes features followed by the label column. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(writer: W, raw: &RawDataset) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut buf = Vec::with_capacity(raw.dim + 1);
    for i in 0..raw.len() {
        buf.clear();
        buf.extend(raw.row(i).iter().map(|v| format!("{v:?}")));
        buf.push(raw.classes[i].to_string());
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: &Path, raw: &RawDataset) -> AppResult<()> {
    let f = File::create(path).map_err(|e| AppError::io(path, e))?;
    write_csv(f, raw).map_err(|e| AppError::format(path, Location::File, e.to_string()))
}
