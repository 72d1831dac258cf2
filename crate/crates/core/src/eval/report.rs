//! Long-format metric report written as CSV.
//!
//! Columns: `metric,scope,n,value,value_m`. `scope` names the offset
//! (`T-30`), task or regime the row belongs to; `value_m` carries the value
//! in meters for distance metrics and is empty otherwise.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::layout::CELL_METERS;

pub const REPORT_COLUMNS: [&str; 5] = ["metric", "scope", "n", "value", "value_m"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected report header {0:?}")]
    Header(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub scope: String,
    pub n: usize,
    pub value: f64,
    pub value_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

/// Distance metrics get a meters column.
fn is_distance(metric: &str) -> bool {
    matches!(metric, "d0" | "d_T" | "d_delta")
}

impl MetricReport {
    pub fn push(&mut self, metric: &str, scope: &str, n: usize, value: f64) {
        let value_m = is_distance(metric).then_some(value * CELL_METERS);
        self.rows.push(ReportRow {
            metric: metric.into(),
            scope: scope.into(),
            n,
            value,
            value_m,
        });
    }

    pub fn get(&self, metric: &str, scope: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.scope == scope)
    }

    pub fn value(&self, metric: &str, scope: &str) -> Option<f64> {
        self.get(metric, scope).map(|r| r.value)
    }

    pub fn extend(&mut self, other: MetricReport) {
        self.rows.extend(other.rows);
    }

    /// Rows sorted by (scope, metric) so output never depends on the order
    /// results arrived in.
    pub fn sorted(&self) -> Vec<ReportRow> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| (&a.scope, &a.metric).cmp(&(&b.scope, &b.metric)));
        rows
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.sorted() {
            w.serialize(&r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| ReportError::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn from_csv(s: &str) -> Result<Self, ReportError> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != REPORT_COLUMNS {
            return Err(ReportError::Header(header));
        }
        let rows = r.deserialize().collect::<Result<Vec<ReportRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_csv()?).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let s = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&s)
    }
}
