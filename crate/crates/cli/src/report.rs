use std::collections::BTreeMap;
use std::path::Path;

use dimineq::inequalities::InequalityEvaluation;
use serde::Serialize;

use crate::CliError;

/// Column set of report.csv; `wall_time` is kept out so reruns are byte-identical.
pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "id",
    "item",
    "lhs",
    "rhs",
    "slack",
    "verdict",
    "tolerance",
    "intermediates",
];

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub id: String,
    pub item: String,
    #[serde(skip)]
    pub order: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: bool,
    pub tolerance: f64,
    pub intermediates: BTreeMap<String, f64>,
    pub wall_time: f64,
}

impl ReportRow {
    pub fn new(scenario: &str, item: &str, order: usize, e: InequalityEvaluation, wall_time: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            id: e.inequality_id,
            item: item.to_string(),
            order,
            lhs: e.lhs,
            rhs: e.rhs,
            slack: e.slack,
            verdict: e.verdict,
            tolerance: e.tolerance_used,
            intermediates: e.intermediates,
            wall_time,
        }
    }

    pub fn intermediate(&self, key: &str) -> Option<f64> {
        self.intermediates.get(key).copied()
    }
}

/// Orders rows by scenario, then id, then declaration order (stable within an item).
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        (a.scenario.as_str(), a.id.as_str(), a.order).cmp(&(b.scenario.as_str(), b.id.as_str(), b.order))
    });
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn flatten(im: &BTreeMap<String, f64>) -> String {
    im.iter()
        .map(|(k, v)| format!("{k}={}", float(*v)))
        .collect::<Vec<_>>()
        .join(";")
}

/// Row fields in [`CSV_HEADER`] order.
pub fn csv_fields(row: &ReportRow) -> Vec<String> {
    vec![
        row.scenario.clone(),
        row.id.clone(),
        row.item.clone(),
        float(row.lhs),
        float(row.rhs),
        float(row.slack),
        if row.verdict { "pass" } else { "fail" }.to_string(),
        float(row.tolerance),
        flatten(&row.intermediates),
    ]
}

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in rows {
        w.write_record(csv_fields(row)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

#[derive(Serialize)]
struct JsonReport<'a> {
    passed: bool,
    rows: &'a [ReportRow],
}

pub fn to_json(rows: &[ReportRow]) -> String {
    let report = JsonReport {
        passed: rows.iter().all(|r| r.verdict),
        rows,
    };
    serde_json::to_string_pretty(&report).expect("serializable report")
}

pub fn write_reports(rows: &[ReportRow], csv_path: &Path, json_path: &Path) -> Result<(), CliError> {
    for (path, text) in [(csv_path, to_csv(rows)), (json_path, to_json(rows))] {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}
