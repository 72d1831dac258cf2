//! Network definitions: master policy, per-task sub-policies with argument
//! embeddings, and the answering module.
//!
//! Every forward pass goes through a [`Tape`], so values seen during a
//! rollout and values recomputed for an update are produced by the same code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{Subgoal, SubgoalSpace, Task};
use crate::sim::{Action, FeatureLayout, Question, Vocab, VocabSizes};
use crate::tensor::{GruParams, LinearParams, ParamId, ParamStore, Tape, TensorError, Var};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("the answer subgoal is handled by the answerer, not a sub-policy")]
    AnswerDispatched,
    #[error("subgoal {0:?} is missing its argument")]
    MissingArgument(Subgoal),
    #[error(transparent)]
    Distance(#[from] crate::sim::DistanceError),
    #[error("answerer needs at least one frame")]
    NoFrames,
    #[error("question encoding has {got} entries, expected {want}")]
    QuestionDim { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub q_dim: usize,
    pub hidden: usize,
    /// Previous-subgoal embedding.
    pub o_dim: usize,
    /// Previous-action embedding.
    pub p_dim: usize,
    /// Argument embedding.
    pub a_dim: usize,
    pub answer_embed: usize,
    pub answer_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            q_dim: 32,
            hidden: 64,
            o_dim: 16,
            p_dim: 16,
            a_dim: 16,
            answer_embed: 16,
            answer_hidden: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MasterParams {
    pub prev: ParamId,
    pub gru: GruParams,
    pub head: LinearParams,
    pub value: LinearParams,
}

#[derive(Debug, Clone)]
pub struct SubParams {
    pub task: Task,
    pub prev: ParamId,
    pub gru: GruParams,
    pub head: LinearParams,
    pub value: LinearParams,
}

#[derive(Debug, Clone)]
pub struct AnswererParams {
    pub tokens: ParamId,
    pub gru: GruParams,
    pub key: LinearParams,
    pub hidden: LinearParams,
    pub out: LinearParams,
}

/// Output of one recurrent policy step, as tape variables.
#[derive(Debug, Clone, Copy)]
pub struct StepOut {
    pub log_probs: Var,
    pub value: Var,
    pub h: Var,
}

#[derive(Debug, Clone)]
pub struct AnswerOut {
    pub log_probs: Var,
    pub attention: Var,
}

/// Parameter layout of the whole controller. Holds ids only; values live in
/// a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Nmc {
    pub cfg: ModelConfig,
    pub vocab: VocabSizes,
    pub features: FeatureLayout,
    pub space: SubgoalSpace,
    pub master: MasterParams,
    /// exit-room, find-room, find-object.
    pub subs: [SubParams; 3],
    pub arg_rooms: Vec<ParamId>,
    pub arg_objects: Vec<ParamId>,
    pub answerer: AnswererParams,
    pub words: Vec<String>,
}

/// Parameter-name prefixes, used to select what a training stage updates.
pub const MASTER_PREFIX: &str = "master.";
pub const SUB_PREFIX: &str = "sub.";
pub const ANSWER_PREFIX: &str = "answer.";

fn task_key(task: Task) -> &'static str {
    task.name()
}

/// Question words the answerer can embed; index 0 is the unknown token.
pub fn answer_words(vocab: &Vocab) -> Vec<String> {
    let mut words: Vec<String> = ["<unk>", "what", "color", "is", "the", "in", "room"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for w in vocab.rooms.iter().chain(&vocab.objects) {
        if !words.contains(w) {
            words.push(w.clone());
        }
    }
    words
}

impl Nmc {
    /// Registers all parameters in `store` (which should be fresh so that
    /// initialization depends only on its seed).
    pub fn new(vocab: VocabSizes, cfg: ModelConfig, store: &mut ParamStore) -> Self {
        let features = FeatureLayout::new(vocab);
        let space = SubgoalSpace::new(vocab);
        let v = features.dim;
        let h = cfg.hidden;

        let master = MasterParams {
            prev: store.add_matrix("master.prev", space.len() + 1, cfg.o_dim),
            gru: GruParams::register(store, "master.gru", cfg.q_dim + v + cfg.o_dim, h),
            head: LinearParams::register_zero(store, "master.head", h, space.len()),
            value: LinearParams::register_zero(store, "master.value", h, 1),
        };
        let subs = Task::MOTION.map(|task| {
            let k = task_key(task);
            SubParams {
                task,
                prev: store.add_matrix(&format!("sub.{k}.prev"), Action::COUNT + 1, cfg.p_dim),
                gru: GruParams::register(
                    store,
                    &format!("sub.{k}.gru"),
                    v + cfg.p_dim + cfg.a_dim,
                    h,
                ),
                head: LinearParams::register_zero(
                    store,
                    &format!("sub.{k}.head"),
                    h,
                    Action::COUNT,
                ),
                value: LinearParams::register_zero(store, &format!("sub.{k}.value"), h, 1),
            }
        });
        let names = Vocab::new(vocab);
        let arg_rows = |store: &mut ParamStore, kind: &str, list: &[String]| -> Vec<ParamId> {
            list.iter()
                .map(|n| store.add_matrix(&format!("sub.arg.{kind}.{n}"), 1, cfg.a_dim))
                .collect()
        };
        let arg_rooms = arg_rows(store, "room", &names.rooms);
        let arg_objects = arg_rows(store, "object", &names.objects);

        let words = answer_words(&names);
        let ha = cfg.answer_hidden;
        let answerer = AnswererParams {
            tokens: store.add_matrix("answer.tokens", words.len(), cfg.answer_embed),
            gru: GruParams::register(store, "answer.gru", cfg.answer_embed, ha),
            key: LinearParams::register(store, "answer.key", v, ha),
            hidden: LinearParams::register(store, "answer.hidden", 2 * ha, ha),
            out: LinearParams::register_zero(store, "answer.out", ha, vocab.colors),
        };
        Self {
            cfg,
            vocab,
            features,
            space,
            master,
            subs,
            arg_rooms,
            arg_objects,
            answerer,
            words,
        }
    }

    pub fn sub(&self, task: Task) -> Result<&SubParams, PolicyError> {
        task.motion_index()
            .map(|i| &self.subs[i])
            .ok_or(PolicyError::AnswerDispatched)
    }

    /// Parameter id of a subgoal's argument row (`None` for exit-room).
    pub fn arg_param(&self, g: Subgoal) -> Result<Option<ParamId>, PolicyError> {
        match g.task {
            Task::ExitRoom => Ok(None),
            Task::FindRoom => g
                .arg
                .map(|a| Some(self.arg_rooms[a]))
                .ok_or(PolicyError::MissingArgument(g)),
            Task::FindObject => g
                .arg
                .map(|a| Some(self.arg_objects[a]))
                .ok_or(PolicyError::MissingArgument(g)),
            Task::Answer => Err(PolicyError::AnswerDispatched),
        }
    }

    pub fn zero_hidden(&self, tape: &mut Tape<'_>) -> Var {
        tape.input(vec![0.0; self.cfg.hidden])
    }

    /// One master decision. `prev` is a subgoal index or the start token.
    pub fn master_step(
        &self,
        tape: &mut Tape<'_>,
        q: Var,
        v: Var,
        prev: usize,
        h: Var,
    ) -> Result<StepOut, PolicyError> {
        let qn = tape.value(q).len();
        if qn != self.cfg.q_dim {
            return Err(PolicyError::QuestionDim {
                got: qn,
                want: self.cfg.q_dim,
            });
        }
        let m = &self.master;
        let o = tape.embed(m.prev, prev)?;
        let x = tape.concat(&[q, v, o]);
        let h = tape.gru(m.gru, x, h)?;
        let logits = tape.linear(m.head, h)?;
        let log_probs = tape.log_softmax(logits);
        let value = tape.linear(m.value, h)?;
        Ok(StepOut {
            log_probs,
            value,
            h,
        })
    }

    /// One sub-policy step for a motion subgoal.
    pub fn sub_step(
        &self,
        tape: &mut Tape<'_>,
        g: Subgoal,
        v: Var,
        prev_action: Option<Action>,
        h: Var,
    ) -> Result<StepOut, PolicyError> {
        let p = self.sub(g.task)?;
        let arg = match self.arg_param(g)? {
            Some(id) => tape.param(id),
            None => tape.input(vec![0.0; self.cfg.a_dim]),
        };
        let prev = tape.embed(p.prev, prev_action.map_or(Action::COUNT, Action::index))?;
        let x = tape.concat(&[v, prev, arg]);
        let h = tape.gru(p.gru, x, h)?;
        let logits = tape.linear(p.head, h)?;
        let log_probs = tape.log_softmax(logits);
        let value = tape.linear(p.value, h)?;
        Ok(StepOut {
            log_probs,
            value,
            h,
        })
    }

    pub fn word_index(&self, token: &str) -> usize {
        self.words.iter().position(|w| w == token).unwrap_or(0)
    }

    /// Encodes the question tokens and attends over the given frames.
    pub fn answer_forward(
        &self,
        tape: &mut Tape<'_>,
        tokens: &[String],
        frames: &[Var],
    ) -> Result<AnswerOut, PolicyError> {
        if frames.is_empty() {
            return Err(PolicyError::NoFrames);
        }
        let a = &self.answerer;
        let mut h = tape.input(vec![0.0; self.cfg.answer_hidden]);
        for t in tokens {
            let e = tape.embed(a.tokens, self.word_index(t))?;
            h = tape.gru(a.gru, e, h)?;
        }
        let mut keys = Vec::with_capacity(frames.len());
        let mut scores = Vec::with_capacity(frames.len());
        for &f in frames {
            let k = tape.linear(a.key, f)?;
            scores.push(tape.dot(h, k)?);
            keys.push(k);
        }
        let scores = tape.concat(&scores);
        let attention = tape.softmax(scores);
        let ctx = tape.weighted_sum(attention, &keys)?;
        let joined = tape.concat(&[h, ctx]);
        let pre = tape.linear(a.hidden, joined)?;
        let hid = tape.tanh(pre);
        let logits = tape.linear(a.out, hid)?;
        let log_probs = tape.log_softmax(logits);
        Ok(AnswerOut {
            log_probs,
            attention,
        })
    }

    /// Stateless convenience wrapper around [`Nmc::master_step`].
    pub fn master_decide(
        &self,
        store: &ParamStore,
        q: &[f64],
        v: &[f64],
        prev: usize,
        h: &[f64],
    ) -> Result<(Vec<f64>, f64, Vec<f64>), PolicyError> {
        let mut tape = Tape::new(store);
        let (q, v, h) = (
            tape.input(q.to_vec()),
            tape.input(v.to_vec()),
            tape.input(h.to_vec()),
        );
        let out = self.master_step(&mut tape, q, v, prev, h)?;
        Ok((
            probs(&tape, out.log_probs),
            tape.scalar(out.value),
            tape.value(out.h).to_vec(),
        ))
    }

    /// Stateless convenience wrapper around [`Nmc::sub_step`].
    pub fn subpolicy_act(
        &self,
        store: &ParamStore,
        g: Subgoal,
        v: &[f64],
        prev_action: Option<Action>,
        h: &[f64],
    ) -> Result<(Vec<f64>, f64, Vec<f64>), PolicyError> {
        let mut tape = Tape::new(store);
        let (v, h) = (tape.input(v.to_vec()), tape.input(h.to_vec()));
        let out = self.sub_step(&mut tape, g, v, prev_action, h)?;
        Ok((
            probs(&tape, out.log_probs),
            tape.scalar(out.value),
            tape.value(out.h).to_vec(),
        ))
    }

    /// Answer distribution over colors and the attention weights, using at
    /// most the last five frames.
    pub fn answer(
        &self,
        store: &ParamStore,
        question: &Question,
        frames: &[Vec<f64>],
    ) -> Result<(Vec<f64>, Vec<f64>), PolicyError> {
        let from = frames.len().saturating_sub(crate::planner::ANSWER_FRAMES);
        let mut tape = Tape::new(store);
        let vars: Vec<Var> = frames[from..]
            .iter()
            .map(|f| tape.input(f.clone()))
            .collect();
        let out = self.answer_forward(&mut tape, &question.tokens, &vars)?;
        Ok((
            probs(&tape, out.log_probs),
            tape.value(out.attention).to_vec(),
        ))
    }
}

pub fn probs(tape: &Tape<'_>, log_probs: Var) -> Vec<f64> {
    tape.value(log_probs).iter().map(|l| l.exp()).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
