//! Exploration reports: a versioned JSON form that keeps the sweep's
//! enumeration order, a fixed-width text table, and a `bw,final_distance`
//! curve for plotting.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_text, schema_error, write_atomic};
use crate::pipeline::{ExplorationReport, ReportRow};

pub const FORMAT: &str = "quantscope-report";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub report: ExplorationReport,
}

impl ReportFile {
    pub fn new(report: ExplorationReport) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            report,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: Self = serde_path_to_error::deserialize(de).map_err(schema_error)?;
        if file.format != FORMAT {
            return Err(Error::Schema {
                location: "format".into(),
                message: format!("expected \"{FORMAT}\""),
            });
        }
        if file.version != VERSION {
            return Err(Error::VersionMismatch {
                found: file.version,
                expected: VERSION,
            });
        }
        for (i, row) in file.report.rows.iter().enumerate() {
            if row.index != i {
                return Err(Error::Schema {
                    location: format!("report.rows[{i}].index"),
                    message: "rows must be in enumeration order".into(),
                });
            }
        }
        Ok(file)
    }
}

const HEADER: [&str; 9] = [
    "#",
    "layer/group",
    "technique",
    "BW",
    "L2 distance",
    "weights saving %",
    "act traffic saving %",
    "value saving %",
    "params",
];

fn cells(row: &ReportRow) -> [String; 9] {
    [
        row.index.to_string(),
        row.label.clone(),
        row.technique.to_string(),
        row.bw.to_string(),
        format!("{:.6e}", row.result.final_distance),
        format!("{:.2}", row.result.weights_saving_pct),
        format!("{:.2}", row.result.activation_traffic_saving_pct),
        format!("{:.2}", row.value_saving_pct()),
        row.params.clone(),
    ]
}

/// Text table of `rows`; an empty slice yields the header alone.
pub fn table_of(rows: &[&ReportRow]) -> String {
    let body: Vec<[String; 9]> = rows.iter().map(|r| cells(r)).collect();
    let mut widths = HEADER.map(str::len);
    for line in &body {
        for (w, c) in widths.iter_mut().zip(line) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut emit = |line: Vec<&str>| {
        let last = line.len() - 1;
        for (i, (c, w)) in line.iter().zip(widths).enumerate() {
            if i == last {
                out.push_str(c);
            } else {
                let _ = write!(out, "{c:<w$}  ");
            }
        }
        out.push('\n');
    };
    emit(HEADER.to_vec());
    for line in &body {
        emit(line.iter().map(String::as_str).collect());
    }
    out
}

/// Table sorted by final distance (stable, so ties keep enumeration order).
pub fn render_table(report: &ExplorationReport) -> String {
    let mut rows: Vec<&ReportRow> = report.rows.iter().collect();
    rows.sort_by(|a, b| a.result.final_distance.total_cmp(&b.result.final_distance));
    table_of(&rows)
}

/// `bw,final_distance` lines in row order.
pub fn curve_csv(report: &ExplorationReport) -> String {
    let mut out = String::from("bw,final_distance\n");
    for (bw, d) in report.curve() {
        let _ = writeln!(out, "{bw},{d:e}");
    }
    out
}

pub fn write_report(path: &Path, report: &ExplorationReport, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Table => render_table(report),
        ReportFormat::Json => ReportFile::new(report.clone()).to_json(),
    };
    write_atomic(path, text.as_bytes())
}

pub fn load_report(path: &Path) -> Result<ExplorationReport> {
    Ok(ReportFile::from_json(&read_text(path)?)?.report)
}
