//! Result and validation records as written by the command-line tool, and
//! the comparison tables built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MemoryConfiguration, Objective};
use crate::search::{Algorithm, SearchResult};
use crate::sim::{LatencySummary, ValidationReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no result or validation records found in {0}")]
    Empty(String),
    #[error("{path}: {reason}")]
    Parse { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A search outcome for one application.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub app: String,
    pub algorithm: Algorithm,
    pub objective: Objective,
    pub slo_seconds: f64,
    pub config: Option<MemoryConfiguration>,
    pub estimated_time: Option<f64>,
    pub estimated_cost: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    /// Search wall time, only recorded on request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl ResultRecord {
    pub fn new(app: impl Into<String>, result: &SearchResult, with_timing: bool) -> Self {
        Self {
            app: app.into(),
            algorithm: result.algorithm,
            objective: result.objective,
            slo_seconds: result.slo_seconds,
            config: result.config.clone(),
            estimated_time: result.estimated_time,
            estimated_cost: result.estimated_cost,
            iterations: result.iterations,
            evaluations: result.evaluations,
            wall_time_s: with_timing.then_some(result.elapsed),
        }
    }
}

/// A simulated replay of a result's configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub app: String,
    pub algorithm: Algorithm,
    pub objective: Objective,
    pub slo_seconds: f64,
    pub requests: usize,
    pub conformance: f64,
    pub latency: Option<LatencySummary>,
    pub estimated_time: Option<f64>,
    /// 100 minus the squared percentage error of the estimate against the
    /// observed 95th percentile.
    pub estimation_accuracy: Option<f64>,
}

impl ValidationRecord {
    pub fn new(result: &ResultRecord, report: &ValidationReport) -> Self {
        let accuracy = match (result.estimated_time, report.latency) {
            (Some(est), Some(lat)) => Some(crate::sim::estimation_accuracy(est, lat.p95)),
            _ => None,
        };
        Self {
            app: result.app.clone(),
            algorithm: result.algorithm,
            objective: result.objective,
            slo_seconds: report.slo_seconds,
            requests: report.requests,
            conformance: report.conformance,
            latency: report.latency,
            estimated_time: result.estimated_time,
            estimation_accuracy: accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
pub enum Record {
    Result(ResultRecord),
    Validation(ValidationRecord),
}

/// One row of the comparison table.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ReportRow {
    pub app: String,
    pub algorithm: String,
    pub objective: String,
    pub slo_seconds: f64,
    pub estimated_time: Option<f64>,
    pub estimated_cost: Option<f64>,
    pub conformance: Option<f64>,
    pub accuracy: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub evaluations: Option<usize>,
}

type RowKey = (String, Algorithm, String, u64);

fn key(app: &str, algorithm: Algorithm, objective: &Objective, slo: f64) -> RowKey {
    (app.to_string(), algorithm, objective.name().to_string(), slo.to_bits())
}

/// Merge result and validation records of the same run into rows, sorted
/// by app, algorithm, objective and SLO.
pub fn build_rows(records: &[Record]) -> Vec<ReportRow> {
    let mut rows: BTreeMap<RowKey, ReportRow> = BTreeMap::new();
    for record in records {
        let (app, algorithm, objective, slo) = match record {
            Record::Result(r) => (&r.app, r.algorithm, &r.objective, r.slo_seconds),
            Record::Validation(v) => (&v.app, v.algorithm, &v.objective, v.slo_seconds),
        };
        let row = rows.entry(key(app, algorithm, objective, slo)).or_insert_with(|| ReportRow {
            app: app.clone(),
            algorithm: algorithm.to_string(),
            objective: objective.name().to_string(),
            slo_seconds: slo,
            ..ReportRow::default()
        });
        match record {
            Record::Result(r) => {
                row.estimated_time = r.estimated_time;
                row.estimated_cost = r.estimated_cost;
                row.wall_time_s = r.wall_time_s;
                row.evaluations = Some(r.evaluations);
            }
            Record::Validation(v) => {
                row.estimated_time = row.estimated_time.or(v.estimated_time);
                row.conformance = Some(v.conformance);
                row.accuracy = v.estimation_accuracy;
            }
        }
    }
    let mut out: Vec<ReportRow> = rows.into_values().collect();
    out.sort_by(|a, b| {
        (a.app.as_str(), a.algorithm.as_str(), a.objective.as_str())
            .cmp(&(b.app.as_str(), b.algorithm.as_str(), b.objective.as_str()))
            .then(a.slo_seconds.total_cmp(&b.slo_seconds))
    });
    out
}

/// Read every `.json` record in `dir`, in file-name order.
pub fn load_records(dir: impl AsRef<Path>) -> Result<Vec<Record>, ReportError> {
    let dir = dir.as_ref();
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut records = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path)?;
        let record = serde_json::from_str(&text)
            .map_err(|e| ReportError::Parse { path: path.display().to_string(), reason: e.to_string() })?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(ReportError::Empty(dir.display().to_string()));
    }
    Ok(records)
}

/// Brute-force wall time divided by greedy wall time, per app and
/// objective where both were timed.
pub fn wall_time_ratios(rows: &[ReportRow]) -> Vec<(String, String, f64)> {
    let mut out = Vec::new();
    for brute in rows.iter().filter(|r| r.algorithm == Algorithm::BruteForce.name()) {
        let greedy = rows.iter().find(|r| {
            r.app == brute.app && r.algorithm == Algorithm::SlamSlo.name() && r.slo_seconds == brute.slo_seconds
        });
        if let (Some(b), Some(g)) = (brute.wall_time_s, greedy.and_then(|g| g.wall_time_s)) {
            if g > 0.0 {
                out.push((brute.app.clone(), brute.objective.clone(), b / g));
            }
        }
    }
    out
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    v.map(|v| format!("{v:.digits$}")).unwrap_or_default()
}

const HEADER: [&str; 10] = [
    "app",
    "algorithm",
    "objective",
    "slo_s",
    "estimated_time_s",
    "estimated_cost_usd",
    "conformance",
    "accuracy_pct",
    "wall_time_s",
    "evaluations",
];

fn columns(row: &ReportRow) -> [String; 10] {
    [
        row.app.clone(),
        row.algorithm.clone(),
        row.objective.clone(),
        row.slo_seconds.to_string(),
        fixed(row.estimated_time, 4),
        row.estimated_cost.map(|c| format!("{c:.6e}")).unwrap_or_default(),
        fixed(row.conformance, 2),
        fixed(row.accuracy, 2),
        row.wall_time_s.map(|w| format!("{w:.6}")).unwrap_or_default(),
        cell(row.evaluations),
    ]
}

pub fn render_csv(rows: &[ReportRow]) -> Result<String, ReportError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(HEADER)?;
    for row in rows {
        writer.write_record(columns(row))?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", HEADER.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(HEADER.len()));
    for row in rows {
        let _ = writeln!(out, "| {} |", columns(row).join(" | "));
    }
    let ratios = wall_time_ratios(rows);
    if !ratios.is_empty() {
        out.push('\n');
        for (app, objective, ratio) in ratios {
            let _ = writeln!(out, "brute-force / slam-slo wall time on {app} ({objective}): {ratio:.1}x");
        }
    }
    out
}
