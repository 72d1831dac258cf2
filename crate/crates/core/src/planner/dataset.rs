//! Plan corpus: expert trajectories with their lifted plans, plus the
//! master, sub-policy and answering datasets derived from them.
//!
//! On disk the corpus is JSON lines: a header line followed by one
//! [`PlanRecord`] per line. New plans are appended; nothing is rewritten.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lift::{lift_trajectory, AnnotatedPlan, LiftError};
use super::path::{shortest_path_to_object, ExpertTrajectory, PathError};
use super::subgoal::{Subgoal, Task};
use crate::par::Exec;
use crate::sim::layout::ObjectId;
use crate::sim::observe::observe;
use crate::sim::{
    Action, AgentState, Heading, HouseLayout, Motion, Pos, Question, Vocab, VocabSizes,
};
use crate::util::rng_for;

pub const CORPUS_FORMAT_VERSION: u32 = 1;

/// Number of trailing frames the answering module sees.
pub const ANSWER_FRAMES: usize = 5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("empty corpus: no plans could be built")]
    Empty,
    #[error("house {house}: {source}")]
    Path { house: u64, source: PathError },
    #[error("house {house}: {source}")]
    Lift { house: u64, source: LiftError },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed corpus line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("corpus format version {got} unsupported (expected {CORPUS_FORMAT_VERSION})")]
    Version { got: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub house_id: u64,
    pub question_id: usize,
    pub question: Question,
    /// Human-readable subgoal names; informational only.
    pub subgoal_tokens: Vec<String>,
    pub plan: AnnotatedPlan,
    /// s_0..s_T.
    pub states: Vec<AgentState>,
    /// a_0..a_{T-1}.
    pub actions: Vec<Motion>,
    /// Observation features for every state.
    pub features: Vec<Vec<f64>>,
}

impl PlanRecord {
    pub fn trajectory(&self) -> ExpertTrajectory {
        ExpertTrajectory::from_states(&self.states, &self.actions)
    }

    pub fn target_object(&self) -> ObjectId {
        self.question.target_object
    }
}

/// One teacher-forced master decision.
#[derive(Debug, Clone, Copy)]
pub struct MasterStep<'a> {
    pub features: &'a [f64],
    pub prev: Option<Subgoal>,
    pub label: Subgoal,
}

/// One sub-policy demonstration: a segment plus the terminal `stop`.
#[derive(Debug, Clone)]
pub struct SubDemo<'a> {
    pub subgoal: Subgoal,
    pub record: &'a PlanRecord,
    pub start: usize,
    pub end: usize,
}

impl SubDemo<'_> {
    /// (features, previous action, expert action) triples, ending with stop.
    pub fn steps(&self) -> Vec<(&[f64], Option<Action>, Action)> {
        let r = self.record;
        (self.start..=self.end)
            .map(|t| {
                let prev = (t > self.start).then(|| Action::from(r.actions[t - 1]));
                let label = if t == self.end {
                    Action::Stop
                } else {
                    Action::from(r.actions[t])
                };
                (r.features[t].as_slice(), prev, label)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct AnswerExample<'a> {
    pub question: &'a Question,
    pub frames: Vec<&'a [f64]>,
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanCorpus {
    pub vocab: VocabSizes,
    pub plans: Vec<PlanRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusHeader {
    format_version: u32,
    kind: String,
    vocab: VocabSizes,
}

impl PlanCorpus {
    pub fn master_sequences(&self) -> Vec<(&PlanRecord, Vec<MasterStep<'_>>)> {
        self.plans
            .iter()
            .map(|r| {
                let steps = r
                    .plan
                    .segments
                    .iter()
                    .enumerate()
                    .map(|(i, seg)| MasterStep {
                        features: &r.features[seg.start],
                        prev: (i > 0).then(|| r.plan.segments[i - 1].subgoal),
                        label: seg.subgoal,
                    })
                    .collect();
                (r, steps)
            })
            .collect()
    }

    /// Motion-segment demonstrations keyed by subgoal, in corpus order.
    pub fn subpolicy_demos(&self) -> BTreeMap<Subgoal, Vec<SubDemo<'_>>> {
        let mut out: BTreeMap<Subgoal, Vec<SubDemo<'_>>> = BTreeMap::new();
        for r in &self.plans {
            for seg in r.plan.motion_segments() {
                out.entry(seg.subgoal).or_default().push(SubDemo {
                    subgoal: seg.subgoal,
                    record: r,
                    start: seg.start,
                    end: seg.end,
                });
            }
        }
        out
    }

    pub fn demos_for_task(&self, task: Task) -> Vec<SubDemo<'_>> {
        self.subpolicy_demos()
            .into_iter()
            .filter(|(g, _)| g.task == task)
            .flat_map(|(_, v)| v)
            .collect()
    }

    pub fn answer_examples(&self) -> Vec<AnswerExample<'_>> {
        self.plans
            .iter()
            .map(|r| {
                let from = r.features.len().saturating_sub(ANSWER_FRAMES);
                AnswerExample {
                    question: &r.question,
                    frames: r.features[from..].iter().map(|f| f.as_slice()).collect(),
                    answer: r.question.answer,
                }
            })
            .collect()
    }

    /// N: number of master-level plans.
    pub fn num_plans(&self) -> usize {
        self.plans.len()
    }

    /// K: number of sub-policy level segments (motion + answer).
    pub fn num_segments(&self) -> usize {
        self.plans.iter().map(|r| r.plan.segments.len()).sum()
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        };
        let header = CorpusHeader {
            format_version: CORPUS_FORMAT_VERSION,
            kind: "plan-corpus".into(),
            vocab: self.vocab,
        };
        let mut out = fs::File::create(path).map_err(io)?;
        writeln!(
            out,
            "{}",
            serde_json::to_string(&header).expect("header serializes")
        )
        .map_err(io)?;
        drop(out);
        append_plans(path, &self.plans)
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = fs::File::open(path).map_err(io)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines.next().ok_or(DatasetError::Empty)?.map_err(io)?;
        let header: CorpusHeader = serde_json::from_str(&header_line)
            .map_err(|source| DatasetError::Json { line: 1, source })?;
        if header.format_version != CORPUS_FORMAT_VERSION {
            return Err(DatasetError::Version {
                got: header.format_version,
            });
        }
        let mut plans = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            plans.push(
                serde_json::from_str(&line).map_err(|source| DatasetError::Json {
                    line: i + 2,
                    source,
                })?,
            );
        }
        Ok(Self {
            vocab: header.vocab,
            plans,
        })
    }
}

/// Appends plan records to an existing corpus file.
pub fn append_plans(path: &Path, plans: &[PlanRecord]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = OpenOptions::new().append(true).open(path).map_err(io)?;
    for p in plans {
        writeln!(
            out,
            "{}",
            serde_json::to_string(p).expect("plan serializes")
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Uniform random pose on a room cell (never a doorway).
pub fn random_spawn<R: Rng>(house: &HouseLayout, rng: &mut R) -> AgentState {
    let cells: Vec<Pos> = house
        .rooms
        .iter()
        .flat_map(|r| r.extent.cells().collect::<Vec<_>>())
        .collect();
    let cell = cells[rng.gen_range(0..cells.len())];
    AgentState::new(cell, Heading::from_index(rng.gen_range(0..4)))
}

/// Expert trajectory, lifted plan and features for one spawn.
pub fn build_plan(
    house: &HouseLayout,
    question: &Question,
    spawn: AgentState,
) -> Result<PlanRecord, DatasetError> {
    let traj = shortest_path_to_object(house, spawn, question.target_object).map_err(|source| {
        DatasetError::Path {
            house: house.id,
            source,
        }
    })?;
    let plan = lift_trajectory(house, &traj, question).map_err(|source| DatasetError::Lift {
        house: house.id,
        source,
    })?;
    let states = traj.states();
    let vocab = Vocab::new(house.vocab);
    Ok(PlanRecord {
        house_id: house.id,
        question_id: question.id,
        question: question.clone(),
        subgoal_tokens: plan
            .segments
            .iter()
            .map(|s| s.subgoal.name(&vocab))
            .collect(),
        features: states.iter().map(|s| observe(house, s)).collect(),
        actions: traj.actions(),
        states,
        plan,
    })
}

/// Builds plans for every (house, question) pair with `spawns_per_question`
/// random spawns each. Houses are processed independently and merged in
/// house-id order, so the output does not depend on `exec`.
pub fn build_dataset(
    houses: &[(HouseLayout, Vec<Question>)],
    spawns_per_question: usize,
    seed: u64,
    exec: Exec,
) -> Result<PlanCorpus, DatasetError> {
    let mut order: Vec<usize> = (0..houses.len()).collect();
    order.sort_by_key(|&i| houses[i].0.id);
    let per_house = exec.map(&order, |&i| {
        let (house, questions) = &houses[i];
        let mut out = Vec::new();
        for q in questions {
            for k in 0..spawns_per_question {
                let mut rng = rng_for(seed, &[house.id, q.id as u64, k as u64]);
                let spawn = random_spawn(house, &mut rng);
                out.push(build_plan(house, q, spawn)?);
            }
        }
        Ok::<_, DatasetError>(out)
    });
    let mut plans = Vec::new();
    for r in per_house {
        plans.extend(r?);
    }
    if plans.is_empty() {
        return Err(DatasetError::Empty);
    }
    let vocab = houses[0].0.vocab;
    Ok(PlanCorpus { vocab, plans })
}
