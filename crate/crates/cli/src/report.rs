//! CSV emission and console tables.
//!
//! Every CSV gets a header row and a stable column order, and all metric
//! floats are written with Rust's shortest round-trip formatting so reruns
//! are byte-identical. Runtime is wall-clock and therefore written with
//! fixed (non-reproducible) precision; consumers comparing outputs should
//! ignore that column.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use rotda_core::pipeline::{MethodId, MethodReport};

/// One row of a benchmark report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: MethodId,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub runtime_s: f64,
    pub seed: u64,
    pub task: String,
}

impl ReportRow {
    pub fn from_report(report: &MethodReport, seed: u64, task: &str) -> Self {
        Self {
            method: report.method,
            mae: report.mae,
            rmse: report.rmse,
            r2: report.r2,
            runtime_s: report.runtime_s,
            seed,
            task: task.to_string(),
        }
    }
}

/// Column order of every method-report CSV.
pub const REPORT_HEADER: [&str; 7] = ["method", "mae", "rmse", "r2", "runtime_s", "seed", "task"];

/// Exact, round-trippable float formatting (`NaN` for undefined values).
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}

/// Writes one CSV file with a header; fields are quoted as needed.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn report_record(row: &ReportRow) -> Vec<String> {
    vec![
        row.method.label().to_string(),
        fmt_float(row.mae),
        fmt_float(row.rmse),
        fmt_float(row.r2),
        format!("{:.4}", row.runtime_s),
        row.seed.to_string(),
        row.task.clone(),
    ]
}

/// Writes method-report rows in the canonical column order.
pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let records: Vec<Vec<String>> = rows.iter().map(report_record).collect();
    write_csv(path, &REPORT_HEADER, &records)
}

/// Renders method-report rows as an aligned console table.
pub fn console_table(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>9} {:>9} {:>9} {:>12}",
        "method", "MAE", "RMSE", "R2", "runtime[s]"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<14} {:>9.4} {:>9.4} {:>9.4} {:>12.4}",
            row.method.pretty(),
            row.mae,
            row.rmse,
            row.r2,
            row.runtime_s
        );
    }
    out
}
