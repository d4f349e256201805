//! Metric tables (CSV and aligned text), training logs and timing tables.
//!
//! Nothing here records wall-clock dates, so identical inputs give
//! byte-identical files.

use crate::error::Result;
use crate::io::write_file;
use dcp_core::train::{EpochRecord, Metrics};
use std::fmt::Write as _;
use std::path::Path;

pub const CODE_VERSION: &str = concat!("dcp-tools ", env!("CARGO_PKG_VERSION"));

/// Column order of every metric table.
pub const METRIC_COLUMNS: [&str; 6] =
    ["MSE(R)", "RMSE(R)", "MAE(R)", "MSE(t)", "RMSE(t)", "MAE(t)"];

/// One method's outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum RowResult {
    Ok(Metrics),
    /// The method could not produce predictions (e.g. training diverged).
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub result: RowResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub title: String,
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

fn metric_values(m: &Metrics) -> [f64; 6] {
    [m.mse_r, m.rmse_r, m.mae_r, m.mse_t, m.rmse_t, m.mae_t]
}

impl Report {
    pub fn new(title: impl Into<String>, config_hash: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            config_hash: config_hash.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, method: impl Into<String>, result: RowResult) {
        self.rows.push(ReportRow {
            method: method.into(),
            result,
        });
    }

    pub fn metrics(&self, method: &str) -> Option<&Metrics> {
        self.rows
            .iter()
            .find(|r| r.method == method)
            .and_then(|r| match &r.result {
                RowResult::Ok(m) => Some(m),
                RowResult::Failed(_) => None,
            })
    }

    pub fn has_failures(&self) -> bool {
        self.rows
            .iter()
            .any(|r| matches!(r.result, RowResult::Failed(_)))
    }

    /// `method,count,MSE(R),...,MAE(t),status,config_sha256,version`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method", "count"];
        header.extend(METRIC_COLUMNS);
        header.extend(["status", "config_sha256", "version"]);
        let _ = w.write_record(&header);
        for r in &self.rows {
            let mut rec = vec![r.method.clone()];
            match &r.result {
                RowResult::Ok(m) => {
                    rec.push(m.count.to_string());
                    rec.extend(metric_values(m).iter().map(|v| format!("{v:.6}")));
                    rec.push("ok".into());
                }
                RowResult::Failed(msg) => {
                    rec.push("0".into());
                    rec.extend(std::iter::repeat_n(String::new(), 6));
                    rec.push(format!("failed: {msg}"));
                }
            }
            rec.push(self.config_hash.clone());
            rec.push(CODE_VERSION.into());
            let _ = w.write_record(&rec);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    /// Aligned table with the metric columns in the usual order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.title);
        let _ = writeln!(s, "config sha256: {}", self.config_hash);
        let _ = writeln!(s, "code version:  {CODE_VERSION}");
        let _ = writeln!(s);
        let mw = self
            .rows
            .iter()
            .map(|r| r.method.len())
            .max()
            .unwrap_or(0)
            .max(6);
        let _ = write!(s, "{:<mw$}", "Method");
        for c in METRIC_COLUMNS {
            let _ = write!(s, " {c:>12}");
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let _ = write!(s, "{:<mw$}", r.method);
            match &r.result {
                RowResult::Ok(m) => {
                    for v in metric_values(m) {
                        let _ = write!(s, " {v:>12.6}");
                    }
                    let _ = writeln!(s);
                }
                RowResult::Failed(msg) => {
                    let _ = writeln!(s, " FAILED: {msg}");
                }
            }
        }
        s
    }

    /// Writes `report.csv` and `report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("report.csv"), self.to_csv())?;
        write_file(&dir.join("report.txt"), self.to_text())
    }
}

/// `training_log.csv`: one row per epoch, validation columns empty on
/// epochs without validation.
pub fn training_log_csv(log: &[EpochRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epoch", "lr", "train_loss"];
    let val_cols: Vec<String> = METRIC_COLUMNS.iter().map(|c| format!("val_{c}")).collect();
    header.extend(val_cols.iter().map(String::as_str));
    let _ = w.write_record(&header);
    for r in log {
        let mut rec = vec![
            r.epoch.to_string(),
            format!("{:e}", r.lr),
            format!("{:.8}", r.train_loss),
        ];
        match &r.val {
            Some(m) => rec.extend(metric_values(m).iter().map(|v| format!("{v:.6}"))),
            None => rec.extend(std::iter::repeat_n(String::new(), 6)),
        }
        let _ = w.write_record(&rec);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Mean seconds per registration for one (method, size) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub points: usize,
    pub trials: usize,
    /// `None` when the cell was skipped.
    pub mean_seconds: Option<f64>,
    pub note: String,
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["method", "points", "trials", "mean_seconds", "note"]);
    for r in rows {
        let _ = w.write_record([
            r.method.clone(),
            r.points.to_string(),
            r.trials.to_string(),
            r.mean_seconds
                .map(|t| format!("{t:.9}"))
                .unwrap_or_default(),
            r.note.clone(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

/// Human-readable timing table (methods as columns, sizes as rows).
pub fn timing_text(rows: &[TimingRow], hardware: &str) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut sizes: Vec<usize> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
        if !sizes.contains(&r.points) {
            sizes.push(r.points);
        }
    }
    let mut s = String::from("Mean seconds per registration\n");
    for line in hardware.lines() {
        let _ = writeln!(s, "{line}");
    }
    let _ = writeln!(s);
    let _ = write!(s, "{:>8}", "# points");
    for m in &methods {
        let _ = write!(s, " {m:>12}");
    }
    let _ = writeln!(s);
    for n in sizes {
        let _ = write!(s, "{n:>8}");
        for m in &methods {
            let cell = rows
                .iter()
                .find(|r| r.points == n && r.method == *m)
                .and_then(|r| r.mean_seconds);
            match cell {
                Some(t) => {
                    let _ = write!(s, " {t:>12.6}");
                }
                None => {
                    let _ = write!(s, " {:>12}", "-");
                }
            }
        }
        let _ = writeln!(s);
    }
    s
}
