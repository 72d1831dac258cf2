//! Append-only CSV metric log.

use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;

pub const METRIC_COLUMNS: [&str; 10] = [
    "stage",
    "step",
    "task",
    "success_rate",
    "loss",
    "d_T",
    "d_delta",
    "accuracy",
    "alpha",
    "wallclock",
];

/// One row; absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRow {
    pub stage: String,
    pub step: usize,
    pub task: String,
    pub success_rate: Option<f64>,
    pub loss: Option<f64>,
    #[serde(rename = "d_T")]
    pub d_t: Option<f64>,
    pub d_delta: Option<f64>,
    pub accuracy: Option<f64>,
    pub alpha: Option<f64>,
    pub wallclock: Option<f64>,
}

pub struct MetricLog {
    writer: Option<csv::Writer<File>>,
    wallclock: bool,
    rows: Vec<MetricRow>,
}

impl MetricLog {
    /// Log that appends to `path`, writing the header for a new file.
    pub fn open(path: &Path, wallclock: bool) -> Result<Self, TrainError> {
        let fresh = !path.exists() || path.metadata().map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
        let writer = csv::WriterBuilder::new()
            .has_headers(fresh)
            .from_writer(file);
        Ok(Self {
            writer: Some(writer),
            wallclock,
            rows: Vec::new(),
        })
    }

    /// Log kept in memory only.
    pub fn memory(wallclock: bool) -> Self {
        Self {
            writer: None,
            wallclock,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, mut row: MetricRow) -> Result<(), TrainError> {
        if !self.wallclock {
            row.wallclock = None;
        }
        if let Some(w) = self.writer.as_mut() {
            w.serialize(&row)
                .map_err(|e| TrainError::Io(e.to_string()))?;
            w.flush().map_err(|e| TrainError::Io(e.to_string()))?;
        }
        log::info!(
            "{} step {} {}: success={:?} loss={:?} alpha={:?}",
            row.stage,
            row.step,
            row.task,
            row.success_rate,
            row.loss,
            row.alpha
        );
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }
}

pub fn read_metric_log(path: &Path) -> Result<Vec<MetricRow>, TrainError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| TrainError::Io(e.to_string()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| TrainError::Io(e.to_string())))
        .collect()
}
