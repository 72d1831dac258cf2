//! Shared fixtures and independent reference implementations for tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nmc_core::planner::{AnnotatedPlan, Subgoal, Task, SUCCESS_RADIUS};
use nmc_core::policy::{Budgets, EpisodeRecord, Mode, ModelConfig, Nmc, Rollout};
use nmc_core::sim::{
    generate_suite, Action, AgentState, GenConfig, Heading, HouseLayout, Pos, Question, VocabSizes,
};
use nmc_core::tensor::{Gradients, GruParams, LinearParams, ParamStore, Tape, TensorError};
use nmc_core::train::{Config, RewardConfig};
use nmc_core::Exec;

pub fn small_vocab() -> VocabSizes {
    VocabSizes {
        room_types: 6,
        object_types: 12,
        colors: 8,
    }
}

pub fn small_gen() -> GenConfig {
    GenConfig {
        vocab: small_vocab(),
        ..GenConfig::default()
    }
}

/// Narrow network so finite-difference checks stay quick.
pub fn tiny_model_cfg() -> ModelConfig {
    ModelConfig {
        q_dim: 6,
        hidden: 5,
        o_dim: 3,
        p_dim: 3,
        a_dim: 3,
        answer_embed: 4,
        answer_hidden: 4,
    }
}

/// Small, fast end-to-end configuration for pipeline tests.
pub fn tiny_config(seed: u64) -> Config {
    let mut cfg = Config {
        seed,
        exec: Exec::Sequential,
        gen: small_gen(),
        model: tiny_model_cfg(),
        ..Config::default()
    };
    cfg.data.train_houses = 4;
    cfg.data.eval_houses = 3;
    cfg.data.spawns_per_question = 1;
    cfg.bc.epochs_sub = 1;
    cfg.bc.epochs_master = 1;
    cfg.bc.epochs_answer = 1;
    cfg.rl.workers = 1;
    cfg.rl.episodes_per_worker = 2;
    cfg.schedule.rounds_sub = 3;
    cfg.schedule.rounds_master = 2;
    cfg.schedule.rounds_joint = 2;
    cfg.schedule.log_every = 1;
    cfg.eval.offsets = vec![10, 30];
    cfg.eval.sub_episodes = 6;
    cfg.log.wallclock = false;
    cfg
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-scale..scale)).collect()
}

/// Overwrites every parameter with uniform noise (zero-initialized heads
/// would otherwise hide most of the gradient paths).
pub fn randomize(store: &mut ParamStore, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for id in 0..store.len() {
        for x in store.value_mut(id) {
            *x = r.gen_range(-scale..scale);
        }
    }
}

/// Policy network with random parameters and random episode inputs.
pub struct PolicyFixture {
    pub model: Nmc,
    pub store: ParamStore,
    pub q: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
}

impl PolicyFixture {
    pub fn new(seed: u64) -> Self {
        let mut store = ParamStore::new(seed);
        let model = Nmc::new(small_vocab(), tiny_model_cfg(), &mut store);
        randomize(&mut store, seed ^ 0x55, 0.5);
        let mut r = rng(seed ^ 0xaa);
        let q = random_vec(&mut r, model.cfg.q_dim, 1.0);
        let frames = (0..6)
            .map(|_| random_vec(&mut r, model.features.dim, 1.0))
            .collect();
        Self {
            model,
            store,
            q,
            frames,
        }
    }

    /// Per-step mean over three master steps of a cross-entropy, value and
    /// entropy loss.
    pub fn master_loss(&self, store: &ParamStore) -> Result<(f64, Gradients), TensorError> {
        let m = &self.model;
        let mut tape = Tape::new(store);
        let q = tape.input(self.q.clone());
        let mut h = m.zero_hidden(&mut tape);
        let mut prev = m.space.start_token();
        let mut terms = Vec::new();
        for (t, f) in self.frames.iter().take(3).enumerate() {
            let v = tape.input(f.clone());
            let out = m.master_step(&mut tape, q, v, prev, h).map_err(as_tensor)?;
            h = out.h;
            let label = (t * 7 + 1) % m.space.len();
            terms.push((tape.pick(out.log_probs, label)?, -1.0));
            terms.push((tape.sq_err(out.value, 0.3 * t as f64), 0.5));
            terms.push((tape.entropy(out.log_probs), -0.01));
            prev = label;
        }
        let n = terms.len() as f64 / 3.0;
        let terms: Vec<_> = terms.into_iter().map(|(v, w)| (v, w / n)).collect();
        let loss = tape.sum(&terms);
        Ok((tape.scalar(loss), tape.backward(loss)?))
    }

    /// Same loss over four sub-policy steps for `g`.
    pub fn sub_loss(
        &self,
        store: &ParamStore,
        g: Subgoal,
    ) -> Result<(f64, Gradients), TensorError> {
        let m = &self.model;
        let mut tape = Tape::new(store);
        let mut h = m.zero_hidden(&mut tape);
        let mut prev = None;
        let mut terms = Vec::new();
        for (t, f) in self.frames.iter().take(4).enumerate() {
            let v = tape.input(f.clone());
            let out = m.sub_step(&mut tape, g, v, prev, h).map_err(as_tensor)?;
            h = out.h;
            let a = Action::from_index(t % Action::COUNT);
            terms.push((tape.pick(out.log_probs, a.index())?, -0.7));
            terms.push((tape.sq_err(out.value, 1.0), 0.5));
            terms.push((tape.entropy(out.log_probs), -0.01));
            prev = Some(a);
        }
        let n = terms.len() as f64 / 3.0;
        let terms: Vec<_> = terms.into_iter().map(|(v, w)| (v, w / n)).collect();
        let loss = tape.sum(&terms);
        Ok((tape.scalar(loss), tape.backward(loss)?))
    }

    pub fn answer_loss(
        &self,
        store: &ParamStore,
        label: usize,
    ) -> Result<(f64, Gradients), TensorError> {
        let m = &self.model;
        let mut tape = Tape::new(store);
        let frames: Vec<_> = self.frames[1..]
            .iter()
            .map(|f| tape.input(f.clone()))
            .collect();
        let tokens: Vec<String> = ["what", "color", "is", "the", "table", "in", "the"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = m
            .answer_forward(&mut tape, &tokens, &frames)
            .map_err(as_tensor)?;
        let lp = tape.pick(out.log_probs, label)?;
        let loss = tape.sum(&[(lp, -1.0)]);
        Ok((tape.scalar(loss), tape.backward(loss)?))
    }
}

pub fn as_tensor(e: nmc_core::policy::PolicyError) -> TensorError {
    match e {
        nmc_core::policy::PolicyError::Tensor(t) => t,
        other => TensorError::Usage(other.to_string()),
    }
}

pub fn motion_subgoals() -> [Subgoal; 3] {
    [
        Subgoal::EXIT_ROOM,
        Subgoal::find_room(2),
        Subgoal::find_object(5),
    ]
}

pub fn task_of(i: usize) -> Task {
    Task::MOTION[i]
}

/// Brute-force double sum: A_t = Σ_{k≥t} (γλ)^{k-t} δ_k.
pub fn gae_double_sum(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let v = |t: usize| if t < n { values[t] } else { bootstrap };
    (0..n)
        .map(|t| {
            (t..n)
                .map(|k| {
                    (gamma * lambda).powi((k - t) as i32) * (rewards[k] + gamma * v(k + 1) - v(k))
                })
                .sum()
        })
        .collect()
}

/// Plain BFS over traversable cells, written independently of the library.
pub fn bfs_distance(house: &HouseLayout, from: Pos, to: Pos) -> Option<u32> {
    let idx = |p: Pos| p.y as usize * house.width + p.x as usize;
    let mut dist = vec![u32::MAX; house.width * house.height];
    let mut queue = VecDeque::new();
    dist[idx(from)] = 0;
    queue.push_back(from);
    while let Some(p) = queue.pop_front() {
        if p == to {
            return Some(dist[idx(p)]);
        }
        for (dx, dy) in [(0, -1), (1, 0), (0, 1), (-1, 0)] {
            let n = Pos::new(p.x + dx, p.y + dy);
            if n.x < 0 || n.y < 0 || n.x as usize >= house.width || n.y as usize >= house.height {
                continue;
            }
            if house.is_traversable(n) && dist[idx(n)] == u32::MAX {
                dist[idx(n)] = dist[idx(p)] + 1;
                queue.push_back(n);
            }
        }
    }
    None
}

/// Whether the open segment between two cell centers passes through the
/// open interior of any wall square (slab clipping per wall cell).
pub fn segment_blocked(house: &HouseLayout, from: Pos, to: Pos) -> bool {
    let (x0, y0) = (from.x as f64, from.y as f64);
    let (dx, dy) = ((to.x - from.x) as f64, (to.y - from.y) as f64);
    for y in from.y.min(to.y)..=from.y.max(to.y) {
        for x in from.x.min(to.x)..=from.x.max(to.x) {
            let p = Pos::new(x, y);
            if p == from || p == to || !house.is_wall(p) {
                continue;
            }
            let (mut t0, mut t1) = (0.0f64, 1.0f64);
            let mut inside = true;
            for (d, lo, hi, o) in [
                (dx, x as f64 - 0.5, x as f64 + 0.5, x0),
                (dy, y as f64 - 0.5, y as f64 + 0.5, y0),
            ] {
                if d == 0.0 {
                    if o <= lo || o >= hi {
                        inside = false;
                    }
                } else {
                    let (a, b) = ((lo - o) / d, (hi - o) / d);
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
            }
            if inside && t0 < t1 {
                return true;
            }
        }
    }
    false
}

/// 90 degree frontal cone of radius 6, agent cell included.
pub fn in_view_oracle(state: &AgentState, p: Pos) -> bool {
    let (hx, hy) = match state.heading {
        Heading::N => (0, -1),
        Heading::E => (1, 0),
        Heading::S => (0, 1),
        Heading::W => (-1, 0),
    };
    let (dx, dy) = (p.x - state.cell.x, p.y - state.cell.y);
    let forward = dx * hx + dy * hy;
    let lateral = (dx * hy - dy * hx).abs();
    (dx, dy) == (0, 0) || (forward >= 1 && lateral <= forward && dx * dx + dy * dy <= 36)
}

pub fn visible_oracle(house: &HouseLayout, state: &AgentState, p: Pos) -> bool {
    in_view_oracle(state, p) && !segment_blocked(house, state.cell, p)
}

/// Breadth-first search over (cell, heading) with unit action costs and
/// an arbitrary goal predicate. Returns the optimal action count.
pub fn pose_search(
    house: &HouseLayout,
    start: AgentState,
    goal: impl Fn(&AgentState) -> bool,
) -> Option<usize> {
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::from([(start, 0usize)]);
    seen.insert(start);
    while let Some((s, d)) = queue.pop_front() {
        if goal(&s) {
            return Some(d);
        }
        let (hx, hy) = match s.heading {
            Heading::N => (0, -1),
            Heading::E => (1, 0),
            Heading::S => (0, 1),
            Heading::W => (-1, 0),
        };
        let ahead = Pos::new(s.cell.x + hx, s.cell.y + hy);
        let mut next = vec![
            AgentState::new(s.cell, Heading::from_index((s.heading.index() + 3) % 4)),
            AgentState::new(s.cell, Heading::from_index((s.heading.index() + 1) % 4)),
        ];
        if house.in_bounds(ahead) && house.is_traversable(ahead) {
            next.push(AgentState::new(ahead, s.heading));
        }
        for n in next {
            if seen.insert(n) {
                queue.push_back((n, d + 1));
            }
        }
    }
    None
}

/// Store with one of every layer type and a loss that uses them all.
pub struct Layers {
    pub store: ParamStore,
    pub lin: LinearParams,
    pub table: usize,
    pub gru: GruParams,
    pub free: usize,
}

pub fn layers(seed: u64) -> Layers {
    let mut store = ParamStore::new(seed);
    let lin = LinearParams::register(&mut store, "lin", 4, 3);
    let table = store.add_matrix("emb", 5, 3);
    let gru = GruParams::register(&mut store, "gru", 6, 3);
    let free = store.add_matrix("free", 1, 3);
    randomize(&mut store, seed, 0.8);
    Layers {
        store,
        lin,
        table,
        gru,
        free,
    }
}

pub fn layer_loss(
    l: &Layers,
    s: &ParamStore,
    x: &[f64],
) -> Result<(f64, nmc_core::tensor::Gradients), TensorError> {
    let mut t = Tape::new(s);
    let xi = t.input(x.to_vec());
    let y = t.linear(l.lin, xi)?;
    let e = t.embed(l.table, 2)?;
    let c = t.concat(&[y, e]);
    let h0 = t.param(l.free);
    let h = t.gru(l.gru, c, h0)?;
    let h2 = t.gru(l.gru, c, h)?;
    let th = t.tanh(h2);
    let sm = t.softmax(th);
    let ws = t.weighted_sum(sm, &[y, e, h])?;
    let d = t.dot(ws, h2)?;
    let ls = t.log_softmax(ws);
    let p = t.pick(ls, 1)?;
    let ent = t.entropy(ls);
    let se = t.sq_err(d, 0.25);
    let ce = t.cross_entropy(h2, 0)?;
    let loss = t.sum(&[(p, -1.0), (ent, 0.3), (se, 0.5), (ce, 1.0)]);
    Ok((t.scalar(loss), t.backward(loss)?))
}

/// Independent goal predicate: in the object's room, within the radius and
/// in sight.
pub fn reached(house: &HouseLayout, q: &Question, s: &AgentState) -> bool {
    let o = &house.objects[q.target_object];
    house.room_at(s.cell) == Some(o.room)
        && bfs_distance(house, s.cell, o.cell).is_some_and(|d| d <= SUCCESS_RADIUS)
        && visible_oracle(house, s, o.cell)
}

/// Re-derives the labels of a plan by walking its states.
pub fn replay_labels(
    house: &HouseLayout,
    states: &[AgentState],
    q: &Question,
) -> Vec<(Subgoal, usize, usize)> {
    let target = &house.objects[q.target_object];
    let mut cuts: Vec<(usize, usize, Option<usize>)> = Vec::new();
    let mut door = None;
    for (t, s) in states.iter().enumerate() {
        if let Some(d) = house.doorways.iter().find(|d| d.cell == s.cell) {
            door = Some(d.id);
        }
        let room = house
            .rooms
            .iter()
            .find(|r| r.extent.contains(s.cell))
            .map(|r| r.id);
        if let Some(room) = room {
            if cuts.last().is_none_or(|c| c.1 != room) {
                cuts.push((t, room, if cuts.is_empty() { None } else { door }));
            }
        }
    }
    let t_end = states.len() - 1;
    let mut out = Vec::new();
    for k in 0..cuts.len() {
        let (start, room, entry) = cuts[k];
        if k + 1 == cuts.len() {
            out.push((Subgoal::find_object(target.object_type), start, t_end));
            break;
        }
        let (end, next) = (cuts[k + 1].0, cuts[k + 1].1);
        if start == end {
            continue;
        }
        let usable = house
            .doorways
            .iter()
            .filter(|d| (d.room_a == room || d.room_b == room) && Some(d.id) != entry)
            .count();
        let g = if usable == 1 {
            Subgoal::EXIT_ROOM
        } else {
            Subgoal::find_room(house.rooms[next].room_type)
        };
        out.push((g, start, end));
    }
    out.push((Subgoal::ANSWER, t_end, t_end));
    out
}

pub fn check_partition(plan: &AnnotatedPlan, len: usize) {
    let mut at = 0;
    for s in &plan.segments {
        assert_eq!(s.start, at);
        assert!(s.end >= s.start);
        at = s.end;
    }
    assert_eq!(at, len);
    let last = plan.segments.last().unwrap();
    assert_eq!(last.subgoal, Subgoal::ANSWER);
    assert!(last.is_empty());
    assert_eq!(
        plan.segments
            .iter()
            .filter(|s| s.subgoal.task == Task::Answer)
            .count(),
        1
    );
}

/// Sampled episodes from a randomly initialized policy on small houses.
pub fn sampled_episodes(
    n: usize,
    seed: u64,
) -> (Vec<EpisodeRecord>, Vec<nmc_core::sim::HouseLayout>) {
    let f = PolicyFixture::new(seed);
    let houses = generate_suite(seed, 10, 2, f.model.cfg.q_dim, &small_gen()).unwrap();
    let ro = Rollout {
        model: &f.model,
        store: &f.store,
        budgets: Budgets {
            per_subgoal: 12,
            decisions: 5,
            total: 40,
        },
        mode: Mode::Sample,
        sub_mode: Mode::Sample,
        rewards: RewardConfig::default(),
    };
    let mut r = rng(seed ^ 7);
    let mut eps = Vec::new();
    let mut hs = Vec::new();
    while eps.len() < n {
        let (house, qs) = &houses[eps.len() % houses.len()];
        let cells = house.traversable_cells();
        let spawn = AgentState::new(
            cells[r.gen_range(0..cells.len())],
            Heading::from_index(r.gen_range(0..4)),
        );
        eps.push(
            ro.episode(house, &qs[eps.len() % qs.len()], spawn, &mut r)
                .unwrap(),
        );
        hs.push(house.clone());
    }
    (eps, hs)
}
