//! Side-by-side comparison of two flow runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

const COLUMNS: [&str; 6] = ["lambda", "l2_dist", "sup_dist", "vol", "ric_l2", "scalar_l2"];

#[derive(Debug, Clone, Serialize)]
pub struct ColumnDeviation {
    pub column: String,
    /// Largest `|a - b| / max(|a|, |b|)` over aligned rows with finite values.
    pub max_rel: f64,
    /// Range of `a / b` over rows where both are nonzero and finite.
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub rows: usize,
    pub columns: Vec<ColumnDeviation>,
    /// Largest `max_rel` over all columns.
    pub max_rel: f64,
}

impl CompareReport {
    pub fn column(&self, name: &str) -> Option<&ColumnDeviation> {
        self.columns.iter().find(|c| c.column == name)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    fn col(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn trace_path(dir: &Path) -> Result<PathBuf> {
    let p = dir.join("trace.csv");
    if p.is_file() {
        return Ok(p);
    }
    let nested = dir.join("deturck").join("trace.csv");
    if nested.is_file() {
        return Ok(nested);
    }
    Err(Error::InvalidArgument(format!("no trace.csv in {}", dir.display())))
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{} is empty", path.display())))?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{} row {}: {e}", path.display(), n + 1)))?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("{} row {} has {} fields", path.display(), n + 1, row.len())));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn grid_of(dir: &Path) -> Option<serde_json::Value> {
    let text = fs::read_to_string(dir.join("summary.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let grid = v.pointer("/config/grid").or_else(|| v.pointer("/deturck/config/grid"))?;
    Some(grid.clone())
}

/// Aligns the traces of two run directories row by row and reports the
/// deviation of every diagnostic column.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<CompareReport> {
    let pa = trace_path(dir_a)?;
    let pb = trace_path(dir_b)?;
    if let (Some(ga), Some(gb)) = (grid_of(pa.parent().unwrap()), grid_of(pb.parent().unwrap())) {
        if ga != gb {
            return Err(Error::InvalidArgument(format!("incompatible grids: {ga} vs {gb}")));
        }
    }
    let (a, b) = (read_table(&pa)?, read_table(&pb)?);
    let (ta, tb) = (
        a.col("t").ok_or_else(|| Error::Format("missing t column".into()))?,
        b.col("t").ok_or_else(|| Error::Format("missing t column".into()))?,
    );
    let n = ta.len().min(tb.len());
    if n == 0 || ta[..n].iter().zip(&tb[..n]).any(|(x, y)| (x - y).abs() > 1e-12 * x.abs().max(1.0)) {
        return Err(Error::InvalidArgument("incompatible time bases".into()));
    }

    let mut columns = Vec::new();
    for name in COLUMNS {
        let (Some(ca), Some(cb)) = (a.col(name), b.col(name)) else { continue };
        let mut dev = ColumnDeviation { column: name.into(), max_rel: 0.0, min_ratio: None, max_ratio: None };
        for (x, y) in ca[..n].iter().zip(&cb[..n]) {
            if !(x.is_finite() && y.is_finite()) {
                continue;
            }
            let s = x.abs().max(y.abs());
            if s > 0.0 {
                dev.max_rel = dev.max_rel.max((x - y).abs() / s);
            }
            if *x != 0.0 && *y != 0.0 {
                let r = x / y;
                dev.min_ratio = Some(dev.min_ratio.map_or(r, |m: f64| m.min(r)));
                dev.max_ratio = Some(dev.max_ratio.map_or(r, |m: f64| m.max(r)));
            }
        }
        columns.push(dev);
    }
    let max_rel = columns.iter().fold(0.0f64, |m, c| m.max(c.max_rel));
    Ok(CompareReport { rows: n, columns, max_rel })
}
