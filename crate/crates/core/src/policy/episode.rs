//! The alternation loop: master picks a subgoal, a sub-policy runs until it
//! stops or runs out of budget, control returns to the master, and the
//! answer subgoal ends the episode.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::goal::SegmentGoal;
use super::model::{argmax, probs, Nmc, PolicyError};
use crate::planner::{Subgoal, Task, ANSWER_FRAMES};
use crate::sim::geodesic::DistanceField;
use crate::sim::layout::RoomId;
use crate::sim::{observe, step, Action, AgentState, HouseLayout, Question};
use crate::tensor::{ParamStore, Tape, Var};
use crate::train::reward::RewardConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub per_subgoal: usize,
    pub decisions: usize,
    pub total: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            per_subgoal: 50,
            decisions: 10,
            total: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Greedy,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Termination {
    Answered,
    Budget,
}

/// One sub-policy step. `action` may be `Stop`, which does not move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub state: AgentState,
    pub prev_action: Option<Action>,
    pub action: Action,
    pub value: f64,
    pub log_prob: f64,
    pub collided: bool,
    pub d_before: Option<u32>,
    pub d_after: Option<u32>,
    pub reward: f64,
    #[serde(skip)]
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub subgoal: Subgoal,
    pub origin_room: Option<RoomId>,
    pub start: AgentState,
    pub end: AgentState,
    pub steps: Vec<ActionStep>,
    pub stopped: bool,
    pub success: bool,
    /// Whether the goal had a reachable target (distances recorded).
    pub has_target: bool,
}

impl Segment {
    /// Primitive motions executed (stop excluded).
    pub fn motions(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| s.action != Action::Stop)
            .count()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub state: AgentState,
    pub prev: usize,
    pub subgoal: Subgoal,
    pub value: f64,
    pub log_prob: f64,
    /// Navigable distance to the target object before and after the subgoal.
    pub d_before: u32,
    pub d_after: u32,
    pub answered: bool,
    pub reward: f64,
    #[serde(skip)]
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub house_id: u64,
    pub question_id: usize,
    pub question: Vec<String>,
    #[serde(skip)]
    pub q: Vec<f64>,
    pub target_object: usize,
    pub answer: usize,
    pub spawn: AgentState,
    pub decisions: Vec<Decision>,
    /// One segment per motion decision, in order.
    pub segments: Vec<Segment>,
    pub termination: Termination,
    pub predicted: usize,
    pub correct: bool,
    pub d0: u32,
    pub d_t: u32,
}

impl EpisodeRecord {
    /// Every visited state from spawn to the final one.
    pub fn states(&self) -> Vec<AgentState> {
        let mut out = vec![self.spawn];
        for seg in &self.segments {
            for (k, s) in seg.steps.iter().enumerate() {
                if s.action != Action::Stop {
                    out.push(seg.steps.get(k + 1).map_or(seg.end, |n| n.state));
                }
            }
        }
        out
    }

    pub fn motions(&self) -> usize {
        self.segments.iter().map(Segment::motions).sum()
    }

    pub fn final_state(&self) -> AgentState {
        self.segments.last().map_or(self.spawn, |s| s.end)
    }

    pub fn master_rewards(&self) -> Vec<f64> {
        self.decisions.iter().map(|d| d.reward).collect()
    }

    pub fn d_delta(&self) -> i64 {
        self.d0 as i64 - self.d_t as i64
    }
}

/// Rollout settings shared by every episode of a run.
#[derive(Debug, Clone, Copy)]
pub struct Rollout<'a> {
    pub model: &'a Nmc,
    pub store: &'a ParamStore,
    pub budgets: Budgets,
    /// Master decisions.
    pub mode: Mode,
    /// Sub-policy actions.
    pub sub_mode: Mode,
    pub rewards: RewardConfig,
}

fn choose<R: Rng>(p: &[f64], mode: Mode, rng: &mut R) -> usize {
    match mode {
        Mode::Greedy => argmax(p),
        Mode::Sample => match WeightedIndex::new(p) {
            Ok(w) => w.sample(rng),
            Err(_) => argmax(p),
        },
    }
}

/// Chooses the next action from (features, previous action); returns the
/// action with its log-probability and value estimate.
pub trait Actor {
    fn act(
        &mut self,
        features: &[f64],
        prev: Option<Action>,
    ) -> Result<(Action, f64, f64), PolicyError>;
}

impl<F> Actor for F
where
    F: FnMut(&[f64], Option<Action>) -> Result<(Action, f64, f64), PolicyError>,
{
    fn act(
        &mut self,
        features: &[f64],
        prev: Option<Action>,
    ) -> Result<(Action, f64, f64), PolicyError> {
        self(features, prev)
    }
}

/// Runs one segment with any actor: at most `budget` motions, ending early
/// on stop. Observation frames after each motion are appended to `frames`.
pub fn run_segment<A: Actor>(
    house: &HouseLayout,
    goal: &SegmentGoal,
    start: AgentState,
    budget: usize,
    rewards: &RewardConfig,
    frames: &mut Vec<Vec<f64>>,
    actor: &mut A,
) -> Result<Segment, PolicyError> {
    let mut state = start;
    let mut features = observe(house, &state);
    let mut prev: Option<Action> = None;
    let mut steps: Vec<ActionStep> = Vec::new();
    let mut motions = 0;
    let mut stopped = false;
    while motions < budget {
        let (a, log_prob, value) = actor.act(&features, prev)?;
        let d_before = goal.distance(state.cell);
        let (next, collided) = match a.motion() {
            Some(m) => step(house, state, m),
            None => (state, false),
        };
        steps.push(ActionStep {
            state,
            prev_action: prev,
            action: a,
            value,
            log_prob,
            collided,
            d_before,
            d_after: goal.distance(next.cell),
            reward: 0.0,
            features: std::mem::take(&mut features),
        });
        if a == Action::Stop {
            stopped = true;
            break;
        }
        motions += 1;
        state = next;
        features = observe(house, &state);
        frames.push(features.clone());
        prev = Some(a);
    }
    let success = goal.success(house, &state, stopped);
    let n = steps.len();
    for (t, s) in steps.iter_mut().enumerate() {
        s.reward = rewards.step_reward(s.d_before, s.d_after, s.collided, t + 1 == n && success);
    }
    Ok(Segment {
        subgoal: goal.subgoal,
        origin_room: goal.origin_room,
        start,
        end: state,
        steps,
        stopped,
        success,
        has_target: goal.distance(start.cell).is_some(),
    })
}

impl Rollout<'_> {
    /// Runs one sub-policy segment from `start` with the learned policy.
    pub fn segment<R: Rng>(
        &self,
        house: &HouseLayout,
        goal: &SegmentGoal,
        start: AgentState,
        budget: usize,
        frames: &mut Vec<Vec<f64>>,
        rng: &mut R,
    ) -> Result<Segment, PolicyError> {
        let g = goal.subgoal;
        self.model.sub(g.task)?;
        let mut tape = Tape::new(self.store);
        let mut h: Var = self.model.zero_hidden(&mut tape);
        let mut actor = |features: &[f64], prev: Option<Action>| {
            let v = tape.input(features.to_vec());
            let out = self.model.sub_step(&mut tape, g, v, prev, h)?;
            h = out.h;
            let p = probs(&tape, out.log_probs);
            let a = Action::from_index(choose(&p, self.sub_mode, rng));
            Ok((
                a,
                tape.value(out.log_probs)[a.index()],
                tape.scalar(out.value),
            ))
        };
        run_segment(
            house,
            goal,
            start,
            budget,
            &self.rewards,
            frames,
            &mut actor,
        )
    }

    /// Full hierarchical episode.
    pub fn episode<R: Rng>(
        &self,
        house: &HouseLayout,
        question: &Question,
        spawn: AgentState,
        rng: &mut R,
    ) -> Result<EpisodeRecord, PolicyError> {
        let model = self.model;
        let target = &house.objects[question.target_object];
        let field = DistanceField::new(house, target.cell)?;
        let dist = |s: &AgentState| field.raw(s.cell);

        let mut tape = Tape::new(self.store);
        let q = tape.input(question.encoding.clone());
        let mut h = model.zero_hidden(&mut tape);
        let mut prev = model.space.start_token();
        let mut state = spawn;
        let mut frames = vec![observe(house, &state)];
        let mut decisions = Vec::new();
        let mut segments = Vec::new();
        let mut used = 0;
        let mut answered = false;

        while decisions.len() < self.budgets.decisions && used < self.budgets.total {
            let features = frames.last().expect("spawn frame").clone();
            let v = tape.input(features.clone());
            let out = model.master_step(&mut tape, q, v, prev, h)?;
            h = out.h;
            let p = probs(&tape, out.log_probs);
            let gi = choose(&p, self.mode, rng);
            let g = model.space.subgoal(gi);
            let d_before = dist(&state);
            let mut decision = Decision {
                state,
                prev,
                subgoal: g,
                value: tape.scalar(out.value),
                log_prob: tape.value(out.log_probs)[gi],
                d_before,
                d_after: d_before,
                answered: g.task == Task::Answer,
                reward: 0.0,
                features,
            };
            if g.task == Task::Answer {
                decisions.push(decision);
                answered = true;
                break;
            }
            let goal = SegmentGoal::resolve(house, g, &state);
            let budget = self.budgets.per_subgoal.min(self.budgets.total - used);
            let seg = self.segment(house, &goal, state, budget, &mut frames, rng)?;
            used += seg.motions();
            state = seg.end;
            decision.d_after = dist(&state);
            decisions.push(decision);
            segments.push(seg);
            prev = gi;
        }

        let from = frames.len().saturating_sub(ANSWER_FRAMES);
        let (answer_probs, _) = model.answer(self.store, question, &frames[from..])?;
        let predicted = argmax(&answer_probs);
        let correct = predicted == question.answer;
        for d in decisions.iter_mut() {
            d.reward = self
                .rewards
                .decision_reward(d.d_before, d.d_after, d.answered && correct);
        }
        Ok(EpisodeRecord {
            house_id: house.id,
            question_id: question.id,
            question: question.tokens.clone(),
            q: question.encoding.clone(),
            target_object: question.target_object,
            answer: question.answer,
            spawn,
            d0: dist(&spawn),
            d_t: dist(&state),
            decisions,
            segments,
            termination: if answered {
                Termination::Answered
            } else {
                Termination::Budget
            },
            predicted,
            correct,
        })
    }
}

/// Subgoal names of an episode, for logs and dumps.
pub fn subgoal_names(ep: &EpisodeRecord, vocab: &crate::sim::Vocab) -> Vec<String> {
    ep.decisions.iter().map(|d| d.subgoal.name(vocab)).collect()
}
