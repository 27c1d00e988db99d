//! CSV and JSON output.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{ContourGrid, SweepResult, SweepRow};
use crate::error::{invalid, Error, Result};

pub const SWEEP_HEADER: &str = "lambda,empirical_error,bound_value,bias2,variance";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid("format", format!("expected csv or json, got {other:?}"))),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn sweep_csv(result: &SweepResult) -> String {
    rows_csv(&result.rows)
}

pub fn rows_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.lambda),
            cell(r.empirical_error),
            cell(r.bound_value),
            cell(r.bias2),
            cell(r.variance)
        );
    }
    out
}

/// Parses CSV written by [`rows_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(invalid("csv", "missing or unexpected header"));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| invalid("csv", format!("bad number {s:?}")))
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != 5 {
                return Err(invalid("csv", format!("expected 5 cells, got {}", cells.len())));
            }
            let lambda = num(cells[0])?.ok_or_else(|| invalid("csv", "empty lambda cell"))?;
            Ok(SweepRow {
                empirical_error: num(cells[1])?,
                bound_value: num(cells[2])?,
                bias2: num(cells[3])?,
                variance: num(cells[4])?,
                ..SweepRow::new(lambda)
            })
        })
        .collect()
}

/// Long-format grid: one line per `(ratio, discrepancy)` cell.
pub fn contour_csv(grid: &ContourGrid) -> String {
    let mut out = format!("ratio,{},bound\n", grid.kind.y_label());
    for (i, &y) in grid.y_axis.iter().enumerate() {
        for (j, &x) in grid.x_axis.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(grid.z[i][j]));
        }
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(format!("json encoding: {e}")))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_sweep(result: &SweepResult, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_text(path, &sweep_csv(result)),
        Format::Json => write_text(path, &to_json(result)?),
    }
}

pub fn emit_contour(grid: &ContourGrid, path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_text(path, &contour_csv(grid)),
        Format::Json => write_text(path, &to_json(grid)?),
    }
}
