//! Field files: a JSON header next to a data file.
//!
//! The header `<stem>.json` records the grid and axis names. The data file is
//! either
//!
//! * `<stem>.csv`: a header row `axis1,...,axisd,value` followed by one row per
//!   node, or
//! * `<stem>.bin`: the node values only, as little-endian `f64`.
//!
//! In both cases nodes appear in row-major order with the last axis varying
//! fastest, and node `i` along an axis sits at `center - half_width + i·h`,
//! `h = 2·half_width/points_per_axis`.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{PhaseGrid, WignerField};
use crate::error::{Error, Result};

pub const NODE_ORDER: &str = "row-major, last axis varies fastest";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldFormat {
    Csv,
    Binary,
}

impl FieldFormat {
    fn extension(self) -> &'static str {
        match self {
            FieldFormat::Csv => "csv",
            FieldFormat::Binary => "bin",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub format: FieldFormat,
    pub data_file: String,
    pub dimension: usize,
    pub points_per_axis: usize,
    pub half_width: f64,
    pub center: Vec<f64>,
    pub axes: Vec<String>,
    pub order: String,
}

/// Writes `<dir>/<stem>.json` and the data file; returns the header path.
pub fn write_field(
    field: &WignerField,
    dir: &Path,
    stem: &str,
    format: FieldFormat,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let grid = field.grid();
    let data_file = format!("{stem}.{}", format.extension());
    let header = FieldHeader {
        format,
        data_file: data_file.clone(),
        dimension: grid.dim(),
        points_per_axis: grid.points_per_axis(),
        half_width: grid.half_width(),
        center: grid.center().to_vec(),
        axes: field.axes().to_vec(),
        order: NODE_ORDER.to_string(),
    };
    match format {
        FieldFormat::Csv => fs::write(dir.join(&data_file), field_to_csv(field))?,
        FieldFormat::Binary => {
            let bytes: Vec<u8> = field
                .values()
                .iter()
                .flat_map(|v| v.to_le_bytes())
                .collect();
            fs::write(dir.join(&data_file), bytes)?;
        }
    }
    let header_path = dir.join(format!("{stem}.json"));
    fs::write(&header_path, serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(header_path)
}

/// CSV rendering of a field: coordinates with shortest round-trip formatting,
/// values in exponent notation.
pub fn field_to_csv(field: &WignerField) -> String {
    let grid = field.grid();
    let mut out = String::new();
    out.push_str(&field.axes().join(","));
    out.push_str(",value\n");
    let mut x = vec![0.0; grid.dim()];
    for (i, v) in field.values().iter().enumerate() {
        grid.point_into(i, &mut x);
        for c in &x {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{v:e}");
    }
    out
}

/// Reads a field from its JSON header path.
pub fn read_field(header_path: &Path) -> Result<WignerField> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(header_path)?)?;
    if header.center.len() != header.dimension || header.axes.len() != header.dimension {
        return Err(Error::Format("header dimension disagrees with center/axes".into()));
    }
    let grid = PhaseGrid::new(header.center.clone(), header.half_width, header.points_per_axis)?;
    let data_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.data_file);
    let values = match header.format {
        FieldFormat::Binary => {
            let bytes = fs::read(&data_path)?;
            if bytes.len() != grid.len() * 8 {
                return Err(Error::Format(format!(
                    "expected {} bytes, found {}",
                    grid.len() * 8,
                    bytes.len()
                )));
            }
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect()
        }
        FieldFormat::Csv => parse_csv_values(&fs::read_to_string(&data_path)?, &grid)?,
    };
    WignerField::new(grid, header.axes, values)
}

fn parse_csv_values(text: &str, grid: &PhaseGrid) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV file".into()))?;
    let d = grid.dim();
    let tol = 1e-9 * grid.step();
    let mut expected = vec![0.0; d];
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        if i >= grid.len() {
            return Err(Error::Format("more rows than grid nodes".into()));
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d + 1 {
            return Err(Error::Format(format!("row {i} has {} columns", cells.len())));
        }
        grid.point_into(i, &mut expected);
        for (axis, cell) in cells[..d].iter().enumerate() {
            let c: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad coordinate in row {i}")))?;
            if (c - expected[axis]).abs() > tol {
                return Err(Error::Format(format!("row {i} is off the grid")));
            }
        }
        values.push(
            cells[d]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad value in row {i}")))?,
        );
    }
    if values.len() != grid.len() {
        return Err(Error::Format(format!(
            "expected {} rows, found {}",
            grid.len(),
            values.len()
        )));
    }
    Ok(values)
}
