use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::report::{csv_fields, ReportRow, CSV_HEADER};
use crate::runner::{run_scenario, RunOptions};
use crate::scenario::Scenario;
use crate::CliError;

pub const DEFAULT_CAP: usize = 10_000;

/// A scenario template whose string values `"$name"` are replaced by swept parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub name: String,
    pub parameters: Vec<SweepParameter>,
    pub scenario: Value,
    #[serde(default)]
    pub cap: Option<usize>,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_output() -> String {
    "sweep.csv".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepParameter {
    /// `start + k step` for `k = 0..=floor((stop - start)/step)`; empty when `stop < start`.
    pub fn values(&self) -> Vec<f64> {
        if self.stop < self.start {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl SweepFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: SweepFile = serde_json::from_str(text).map_err(CliError::from_json)?;
        if s.parameters.is_empty() || s.parameters.len() > 2 {
            return Err(CliError::Validation("a sweep declares one or two parameters".into()));
        }
        for p in &s.parameters {
            if !(p.step > 0.0) || !p.start.is_finite() || !p.stop.is_finite() {
                return Err(CliError::Validation(format!(
                    "parameter {}: need finite bounds and a positive step",
                    p.name
                )));
            }
        }
        Ok(s)
    }

    /// Cross product of the parameter ranges, first parameter varying slowest.
    pub fn points(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let ranges: Vec<Vec<f64>> = self.parameters.iter().map(SweepParameter::values).collect();
        let size = ranges.iter().map(Vec::len).product::<usize>();
        let cap = self.cap.unwrap_or(DEFAULT_CAP);
        if size > cap {
            return Err(CliError::Validation(format!(
                "sweep has {size} points, above the cap of {cap}"
            )));
        }
        let mut points = vec![Vec::new()];
        for range in &ranges {
            points = points
                .into_iter()
                .flat_map(|p| {
                    range.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }

    fn instantiate(&self, point: &[f64]) -> Result<Scenario, CliError> {
        let mut value = self.scenario.clone();
        for (p, v) in self.parameters.iter().zip(point) {
            substitute(&mut value, &format!("${}", p.name), *v);
        }
        Scenario::from_value(value)
    }
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Value::from(v as i64)
    } else {
        Value::from(v)
    }
}

fn substitute(value: &mut Value, placeholder: &str, v: f64) {
    match value {
        Value::String(s) if s == placeholder => *value = number(v),
        Value::Array(items) => items.iter_mut().for_each(|x| substitute(x, placeholder, v)),
        Value::Object(map) => map.values_mut().for_each(|x| substitute(x, placeholder, v)),
        _ => {}
    }
}

pub struct SweepResult {
    pub parameter_names: Vec<String>,
    pub rows: Vec<(Vec<f64>, ReportRow)>,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|(_, r)| r.verdict)
    }

    /// Long format: one line per (point, report row).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = self
            .parameter_names
            .iter()
            .map(String::as_str)
            .chain(CSV_HEADER)
            .collect();
        w.write_record(&header).expect("in-memory write");
        for (point, row) in &self.rows {
            let fields: Vec<String> = point
                .iter()
                .map(|v| crate::report::float(*v))
                .chain(csv_fields(row))
                .collect();
            w.write_record(&fields).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub fn run_sweep(sweep: &SweepFile, opts: &RunOptions) -> Result<SweepResult, CliError> {
    let points = sweep.points()?;
    let per_point = points
        .par_iter()
        .map(|p| {
            let scenario = sweep.instantiate(p)?;
            Ok(run_scenario(&scenario, opts)?
                .into_iter()
                .map(|r| (p.clone(), r))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SweepResult {
        parameter_names: sweep.parameters.iter().map(|p| p.name.clone()).collect(),
        rows: per_point.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_the_endpoint() {
        let p = SweepParameter {
            name: "a".into(),
            start: 0.0,
            stop: 3.0,
            step: 0.1,
        };
        assert_eq!(p.values().len(), 31);
        let empty = SweepParameter { stop: -1.0, ..p };
        assert!(empty.values().is_empty());
    }

    #[test]
    fn placeholders_become_numbers() {
        let mut v: Value = serde_json::json!({"dim": "$n", "mean": ["$a", 1.0], "name": "x"});
        substitute(&mut v, "$n", 3.0);
        substitute(&mut v, "$a", 0.5);
        assert_eq!(v, serde_json::json!({"dim": 3, "mean": [0.5, 1.0], "name": "x"}));
    }
}
