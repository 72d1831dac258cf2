//! Evaluation: sub-policy success, master IoU, question-answering metrics.

pub mod eqa;
pub mod iou;
pub mod replay;
pub mod report;
pub mod subpolicy;

use thiserror::Error;

pub use eqa::{
    aggregate, better_regime, check_disjoint, eqa_cases, eval_eqa, EpisodeMetrics, EqaCase, EqaRun,
};
pub use iou::{eval_master_iou, multiset_iou, random_sequence_iou, sequence_iou, IouReport};
pub use replay::{replay_episode, replay_segment, ReplayError};
pub use report::{MetricReport, ReportError, ReportRow, REPORT_COLUMNS};
pub use subpolicy::{eval_subpolicy, sub_cases, SubAgent, SubCase, SubEval};

use crate::policy::PolicyError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("evaluation house {0} was also used for training")]
    Overlap(u64),
    #[error(transparent)]
    Report(#[from] ReportError),
}
