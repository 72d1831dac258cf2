//! The three reinforcement-learning settings: one sub-policy task on its
//! own expert segments, the master over frozen sub-policies, and the full
//! hierarchy with both levels learning.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::a3c::{master_terms, segment_terms, A3cConfig, RlProblem};
use super::batch::ItemLoss;
use super::curriculum::sample_start;
use super::reward::RewardConfig;
use crate::planner::{PlanCorpus, PlanRecord, Subgoal, Task};
use crate::policy::{
    Budgets, EpisodeRecord, Mode, Nmc, PolicyError, Rollout, Segment, SegmentGoal,
};
use crate::sim::{HouseLayout, Question};
use crate::tensor::{ParamStore, Tape};

/// One motion segment of an expert plan.
#[derive(Debug, Clone, Copy)]
pub struct ExpertSegment<'a> {
    pub record: &'a PlanRecord,
    pub subgoal: Subgoal,
    pub start: usize,
    pub end: usize,
}

/// Goal of an expert segment: the first cell past the doorway for
/// exit-room and find-room, the question's object for find-object.
pub fn expert_goal(house: &HouseLayout, seg: &ExpertSegment<'_>) -> SegmentGoal {
    let r = seg.record;
    let origin = house.room_at(r.states[seg.start].cell);
    let target = match seg.subgoal.task {
        Task::FindObject => house.objects[r.question.target_object].cell,
        _ => r.states[seg.end].cell,
    };
    SegmentGoal::toward(house, seg.subgoal, origin, vec![target])
}

pub fn house_index(houses: &[(HouseLayout, Vec<Question>)]) -> HashMap<u64, usize> {
    houses
        .iter()
        .enumerate()
        .map(|(i, (h, _))| (h.id, i))
        .collect()
}

pub fn expert_segments(corpus: &PlanCorpus, task: Task) -> Vec<ExpertSegment<'_>> {
    corpus
        .plans
        .iter()
        .flat_map(|r| {
            r.plan
                .motion_segments()
                .filter(move |s| s.subgoal.task == task)
                .map(move |s| ExpertSegment {
                    record: r,
                    subgoal: s.subgoal,
                    start: s.start,
                    end: s.end,
                })
        })
        .collect()
}

/// Sub-policy training for one task, spawning along expert segments.
pub struct SubTaskProblem<'a> {
    pub model: &'a Nmc,
    pub houses: &'a [(HouseLayout, Vec<Question>)],
    pub index: HashMap<u64, usize>,
    pub segments: Vec<ExpertSegment<'a>>,
    pub budgets: Budgets,
    pub rewards: RewardConfig,
    pub a3c: A3cConfig,
}

impl<'a> SubTaskProblem<'a> {
    pub fn new(
        model: &'a Nmc,
        houses: &'a [(HouseLayout, Vec<Question>)],
        corpus: &'a PlanCorpus,
        task: Task,
        budgets: Budgets,
        rewards: RewardConfig,
        a3c: A3cConfig,
    ) -> Self {
        Self {
            model,
            houses,
            index: house_index(houses),
            segments: expert_segments(corpus, task),
            budgets,
            rewards,
            a3c,
        }
    }
}

impl RlProblem for SubTaskProblem<'_> {
    type Episode = Segment;

    fn rollout(
        &self,
        store: &ParamStore,
        alpha: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Segment, PolicyError> {
        let seg = &self.segments[rng.gen_range(0..self.segments.len())];
        let house = &self.houses[self.index[&seg.record.house_id]].0;
        let k = sample_start(seg.end - seg.start, alpha, rng);
        let spawn = seg.record.states[seg.start + k];
        let goal = expert_goal(house, seg);
        let roll = Rollout {
            model: self.model,
            store,
            budgets: self.budgets,
            mode: Mode::Sample,
            sub_mode: Mode::Sample,
            rewards: self.rewards,
        };
        roll.segment(
            house,
            &goal,
            spawn,
            self.budgets.per_subgoal,
            &mut Vec::new(),
            rng,
        )
    }

    fn success(&self, ep: &Segment) -> bool {
        ep.success
    }

    fn loss(&self, tape: &mut Tape<'_>, ep: &Segment) -> Result<Option<ItemLoss>, PolicyError> {
        let terms = segment_terms(self.model, tape, ep, &self.rewards, &self.a3c)?;
        Ok((!terms.is_empty()).then(|| ItemLoss {
            loss: tape.sum(&terms),
            terms: ep.steps.len(),
        }))
    }
}

/// Full-episode training. With `train_subs` off only master parameters
/// receive gradients (the sub-policies act greedily and stay frozen).
pub struct HierarchyProblem<'a> {
    pub model: &'a Nmc,
    pub houses: &'a [(HouseLayout, Vec<Question>)],
    pub index: HashMap<u64, usize>,
    pub plans: &'a [PlanRecord],
    pub budgets: Budgets,
    pub rewards: RewardConfig,
    pub a3c: A3cConfig,
    pub train_subs: bool,
}

impl<'a> HierarchyProblem<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: &'a Nmc,
        houses: &'a [(HouseLayout, Vec<Question>)],
        corpus: &'a PlanCorpus,
        budgets: Budgets,
        rewards: RewardConfig,
        a3c: A3cConfig,
        train_subs: bool,
    ) -> Self {
        Self {
            model,
            houses,
            index: house_index(houses),
            plans: &corpus.plans,
            budgets,
            rewards,
            a3c,
            train_subs,
        }
    }
}

impl RlProblem for HierarchyProblem<'_> {
    type Episode = EpisodeRecord;

    fn rollout(
        &self,
        store: &ParamStore,
        alpha: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<EpisodeRecord, PolicyError> {
        let plan = &self.plans[rng.gen_range(0..self.plans.len())];
        let house = &self.houses[self.index[&plan.house_id]].0;
        let k = sample_start(plan.actions.len(), alpha, rng);
        let roll = Rollout {
            model: self.model,
            store,
            budgets: self.budgets,
            mode: Mode::Sample,
            sub_mode: if self.train_subs {
                Mode::Sample
            } else {
                Mode::Greedy
            },
            rewards: self.rewards,
        };
        roll.episode(house, &plan.question, plan.states[k], rng)
    }

    fn success(&self, ep: &EpisodeRecord) -> bool {
        ep.correct
    }

    fn loss(
        &self,
        tape: &mut Tape<'_>,
        ep: &EpisodeRecord,
    ) -> Result<Option<ItemLoss>, PolicyError> {
        let mut terms = master_terms(self.model, tape, ep, &self.rewards, &self.a3c)?;
        let mut n = ep.decisions.len();
        if self.train_subs {
            for seg in &ep.segments {
                terms.extend(segment_terms(
                    self.model,
                    tape,
                    seg,
                    &self.rewards,
                    &self.a3c,
                )?);
                n += seg.steps.len();
            }
        }
        Ok((!terms.is_empty()).then(|| ItemLoss {
            loss: tape.sum(&terms),
            terms: n,
        }))
    }
}
