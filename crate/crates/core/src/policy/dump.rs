//! Per-episode trajectory dumps (JSON) for offline inspection and replay.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::{EpisodeRecord, Termination};
use crate::sim::Vocab;

pub const DUMP_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed trajectory dump: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trajectory dump format version {got} unsupported (expected {DUMP_FORMAT_VERSION})")]
    Version { got: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDump {
    pub format_version: u32,
    pub question_text: String,
    pub answer_name: String,
    pub predicted_name: String,
    pub subgoal_names: Vec<String>,
    pub record: EpisodeRecord,
}

impl TrajectoryDump {
    pub fn new(record: &EpisodeRecord, vocab: &Vocab) -> Self {
        Self {
            format_version: DUMP_FORMAT_VERSION,
            question_text: format!("{}?", record.question.join(" ")),
            answer_name: vocab.colors[record.answer].clone(),
            predicted_name: vocab.colors[record.predicted].clone(),
            subgoal_names: record
                .decisions
                .iter()
                .map(|d| d.subgoal.name(vocab))
                .collect(),
            record: record.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, DumpError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(s)?;
        if probe.format_version != DUMP_FORMAT_VERSION {
            return Err(DumpError::Version {
                got: probe.format_version,
            });
        }
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), DumpError> {
        fs::write(path, self.to_json()).map_err(|source| DumpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DumpError> {
        let s = fs::read_to_string(path).map_err(|source| DumpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }

    /// Human-readable listing with one line per subgoal and per action.
    pub fn pretty(&self) -> String {
        let r = &self.record;
        let mut out = String::new();
        out.push_str(&format!(
            "house {} question {}: {}\n",
            r.house_id, r.question_id, self.question_text
        ));
        out.push_str(&format!(
            "spawn ({}, {}) {:?}  d0={} dT={} d_delta={}\n",
            r.spawn.cell.x,
            r.spawn.cell.y,
            r.spawn.heading,
            r.d0,
            r.d_t,
            r.d_delta()
        ));
        let mut segs = r.segments.iter();
        for (d, name) in r.decisions.iter().zip(&self.subgoal_names) {
            out.push_str(&format!(
                "[{name}] p={:.3} value={:.3} reward={:+.3}\n",
                d.log_prob.exp(),
                d.value,
                d.reward
            ));
            if d.answered {
                continue;
            }
            if let Some(seg) = segs.next() {
                for s in &seg.steps {
                    out.push_str(&format!(
                        "    ({:>2},{:>2}) {:?} {:<10}{} r={:+.3}\n",
                        s.state.cell.x,
                        s.state.cell.y,
                        s.state.heading,
                        s.action.name(),
                        if s.collided { " collided" } else { "" },
                        s.reward
                    ));
                }
                let outcome = match (seg.stopped, seg.success) {
                    (true, true) => "stopped, success",
                    (true, false) => "stopped, failure",
                    _ => "budget exhausted",
                };
                out.push_str(&format!(
                    "    -> ({}, {}) {outcome}\n",
                    seg.end.cell.x, seg.end.cell.y
                ));
            }
        }
        let how = match r.termination {
            Termination::Answered => "answered",
            Termination::Budget => "budget exhausted, forced answer",
        };
        out.push_str(&format!(
            "answer: {} (truth {}) {} [{how}]\n",
            self.predicted_name,
            self.answer_name,
            if r.correct { "correct" } else { "wrong" }
        ));
        out
    }
}
