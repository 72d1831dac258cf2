mod common;

use std::collections::HashMap;

use common::*;
use nmc_core::eval::{
    aggregate, better_regime, eqa_cases, eval_eqa, eval_master_iou, eval_subpolicy, multiset_iou,
    random_sequence_iou, replay_episode, replay_segment, sequence_iou, EpisodeMetrics, EvalError,
    MetricReport, SubAgent, REPORT_COLUMNS,
};
use nmc_core::planner::{build_dataset, shortest_path_to_object, Subgoal, Task, SUCCESS_RADIUS};
use nmc_core::policy::{Budgets, Mode, Nmc, Rollout, Segment};
use nmc_core::sim::{generate_suite, HouseLayout, Question};
use nmc_core::tensor::ParamStore;
use nmc_core::train::{bc_train_master, BcConfig, RewardConfig};
use nmc_core::Exec;
use proptest::prelude::*;

fn suite(seed: u64, n: usize) -> Vec<(HouseLayout, Vec<Question>)> {
    generate_suite(seed, n, 2, tiny_model_cfg().q_dim, &small_gen()).unwrap()
}

fn fresh(seed: u64) -> (Nmc, ParamStore) {
    let mut store = ParamStore::new(seed);
    let model = Nmc::new(small_vocab(), tiny_model_cfg(), &mut store);
    (model, store)
}

/// Brute-force multiset IoU: expand every distinct token's counts.
fn iou_oracle(a: &[Subgoal], b: &[Subgoal]) -> f64 {
    let mut keys: Vec<Subgoal> = a.iter().chain(b).copied().collect();
    keys.sort();
    keys.dedup();
    let (mut i, mut u) = (0, 0);
    for k in keys {
        let ca = a.iter().filter(|&&x| x == k).count();
        let cb = b.iter().filter(|&&x| x == k).count();
        i += ca.min(cb);
        u += ca.max(cb);
    }
    if u == 0 {
        1.0
    } else {
        i as f64 / u as f64
    }
}

#[test]
fn iou_examples() {
    let living = Subgoal::find_room(1);
    let sofa = Subgoal::find_object(1);
    let pred = [Subgoal::EXIT_ROOM, living, Subgoal::ANSWER];
    let truth = [Subgoal::EXIT_ROOM, living, sofa, Subgoal::ANSWER];
    assert_eq!(multiset_iou(&pred, &truth), 0.75);
    assert_eq!(iou_oracle(&pred, &truth), 0.75);
    assert_eq!(multiset_iou(&truth, &truth), 1.0);
    assert_eq!(multiset_iou(&[Subgoal::EXIT_ROOM], &[sofa]), 0.0);
    assert_eq!(sequence_iou(&pred, &truth), 0.75);
    assert_eq!(sequence_iou(&[sofa, living], &[living, sofa]), 1.0 / 3.0);
    assert_eq!(multiset_iou(&[sofa, living], &[living, sofa]), 1.0);
}

fn subgoal_strategy() -> impl Strategy<Value = Subgoal> {
    prop_oneof![
        Just(Subgoal::EXIT_ROOM),
        Just(Subgoal::ANSWER),
        (0usize..3).prop_map(Subgoal::find_room),
        (0usize..3).prop_map(Subgoal::find_object),
    ]
}

proptest! {
    #[test]
    fn multiset_iou_matches_oracle(
        a in prop::collection::vec(subgoal_strategy(), 0..8),
        b in prop::collection::vec(subgoal_strategy(), 0..8),
    ) {
        let x = multiset_iou(&a, &b);
        prop_assert!((x - iou_oracle(&a, &b)).abs() < 1e-15);
        prop_assert_eq!(x, multiset_iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!(sequence_iou(&a, &b) <= x + 1e-15);
    }

    #[test]
    fn d_delta_is_exact_per_episode(d0 in 0u32..500, dt in 0u32..500) {
        let e = EpisodeMetrics::new(30, d0, dt, false, false);
        prop_assert_eq!(e.d_delta, e.d0 - e.d_t);
        prop_assert_eq!(e.d_delta, d0 as f64 - dt as f64);
    }
}

#[test]
fn d_delta_fixture() {
    // 100 episodes whose means are d0 = 4.87 and d_T = 4.25 cells.
    let mut eps = Vec::new();
    for i in 0..100u32 {
        let d0 = if i < 87 { 5 } else { 4 };
        let dt = if i < 25 { 5 } else { 4 };
        eps.push(EpisodeMetrics::new(30, d0, dt, i % 2 == 0, false));
    }
    let r = aggregate(&eps);
    assert!((r.value("d0", "T-30").unwrap() - 4.87).abs() < 1e-12);
    assert!((r.value("d_T", "T-30").unwrap() - 4.25).abs() < 1e-12);
    assert!((r.value("d_delta", "T-30").unwrap() - 0.62).abs() < 1e-12);
    assert_eq!(r.get("d_delta", "T-30").unwrap().n, 100);
    assert!((r.get("d0", "T-30").unwrap().value_m.unwrap() - 4.87 * 0.25).abs() < 1e-12);
    assert_eq!(r.value("accuracy", "T-30"), Some(0.5));
}

#[test]
fn report_csv_round_trip() {
    let mut r = MetricReport::default();
    r.push("success", "find-room", 40, 0.375);
    r.push("d_T", "T-10", 12, 3.5);
    let csv = r.to_csv().unwrap();
    assert!(csv.starts_with(&REPORT_COLUMNS.join(",")));
    let back = MetricReport::from_csv(&csv).unwrap();
    assert_eq!(back.sorted(), r.sorted());
    assert!(MetricReport::from_csv("a,b\n1,2\n").is_err());
}

#[test]
fn better_regime_marks_lower_distance_and_higher_accuracy() {
    let mk = |dt, acc| {
        let mut r = MetricReport::default();
        r.push("d_T", "T-30", 10, dt);
        r.push("accuracy", "T-30", 10, acc);
        r
    };
    let (a, b) = (mk(3.0, 0.5), mk(4.0, 0.3));
    assert_eq!(
        better_regime(("bc+a3c", &a), ("bc", &b), 30),
        Some("bc+a3c")
    );
    assert_eq!(better_regime(("x", &mk(3.0, 0.2)), ("y", &b), 30), None);
}

/// Table 1 rules re-derived with the test's own BFS.
fn rule_oracle(house: &HouseLayout, seg: &Segment) -> bool {
    let stopped = seg
        .steps
        .last()
        .is_some_and(|s| s.action == nmc_core::sim::Action::Stop);
    if !stopped {
        return false;
    }
    let cell = seg.end.cell;
    let room = house.rooms.iter().find(|r| r.extent.contains(cell));
    match (seg.subgoal.task, seg.subgoal.arg) {
        (Task::ExitRoom, _) => room.is_some_and(|r| Some(r.id) != seg.origin_room),
        (Task::FindRoom, Some(t)) => room.is_some_and(|r| r.room_type == t),
        (Task::FindObject, Some(t)) => house.objects.iter().any(|o| {
            o.object_type == t
                && bfs_distance(house, cell, o.cell).is_some_and(|d| d <= SUCCESS_RADIUS)
        }),
        _ => false,
    }
}

#[test]
fn sub_policy_baselines_and_rule_replay() {
    let houses = suite(31, 10);
    let (m, s) = fresh(31);
    let budgets = Budgets::default();
    for task in Task::MOTION {
        let expert = eval_subpolicy(
            &m,
            &s,
            &houses,
            task,
            60,
            SubAgent::Expert,
            budgets,
            1,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(expert.rate(), 1.0, "{task:?}");
        let random = eval_subpolicy(
            &m,
            &s,
            &houses,
            task,
            60,
            SubAgent::Random,
            budgets,
            1,
            Exec::Sequential,
        )
        .unwrap();
        assert!(random.rate() < 1.0);
        let learned = eval_subpolicy(
            &m,
            &s,
            &houses,
            task,
            60,
            SubAgent::Learned,
            budgets,
            1,
            Exec::Parallel,
        )
        .unwrap();
        for e in [&expert, &random, &learned] {
            assert_eq!(e.episodes, 60);
            for seg in &e.segments {
                let house = houses
                    .iter()
                    .map(|(h, _)| h)
                    .find(|h| h.traversable_cells().contains(&seg.start.cell) && seg_in(h, seg))
                    .unwrap();
                assert_eq!(replay_segment(house, seg).unwrap(), seg.success);
                assert_eq!(rule_oracle(house, seg), seg.success);
                assert!(seg.motions() <= 50);
            }
        }
    }
}

/// Whether the segment's walk is consistent with this house.
fn seg_in(h: &HouseLayout, seg: &Segment) -> bool {
    replay_segment(h, seg).is_ok()
}

#[test]
fn sub_policy_evaluation_is_mode_independent() {
    let houses = suite(32, 6);
    let f = PolicyFixture::new(32);
    let b = Budgets::default();
    let mut sampling_differs = false;
    for task in Task::MOTION {
        let run = |agent, exec| {
            eval_subpolicy(&f.model, &f.store, &houses, task, 20, agent, b, 3, exec).unwrap()
        };
        for agent in [SubAgent::Learned, SubAgent::Sampled, SubAgent::Random] {
            let a = run(agent, Exec::Sequential);
            assert_eq!(a.segments, run(agent, Exec::Parallel).segments);
        }
        sampling_differs |= run(SubAgent::Learned, Exec::Sequential).segments
            != run(SubAgent::Sampled, Exec::Sequential).segments;
    }
    assert!(sampling_differs);
}

#[test]
fn master_iou_beats_random_after_cloning() {
    let train = suite(33, 30);
    let corpus = build_dataset(&train, 2, 1, Exec::Sequential).unwrap();
    let mut s = ParamStore::new(33);
    let m = Nmc::new(
        small_vocab(),
        nmc_core::policy::ModelConfig {
            q_dim: tiny_model_cfg().q_dim,
            ..Default::default()
        },
        &mut s,
    );
    let before = eval_master_iou(&m, &s, &corpus.plans, false, Exec::Sequential).unwrap();
    let cfg = BcConfig {
        epochs_master: 40,
        ..BcConfig::default()
    };
    bc_train_master(&m, &mut s, &corpus, &cfg, 1, Exec::Sequential, |_| {}).unwrap();
    let after = eval_master_iou(&m, &s, &corpus.plans, false, Exec::Parallel).unwrap();
    let random = random_sequence_iou(&m, &corpus.plans, false, 1);
    assert_eq!(after.episodes, corpus.num_plans());
    assert!(
        after.mean > 2.0 * random.mean,
        "{} vs random {}",
        after.mean,
        random.mean
    );
    assert!(after.mean > before.mean);
}

#[test]
fn eqa_spawns_back_off_the_expert_path() {
    let houses = suite(34, 8);
    let cases = eqa_cases(&houses, &[10, 30, 50]);
    assert!(!cases.is_empty());
    let mut by_offset: HashMap<usize, usize> = HashMap::new();
    for c in &cases {
        *by_offset.entry(c.offset).or_default() += 1;
        let (h, qs) = &houses[c.house];
        let t = shortest_path_to_object(h, c.spawn, qs[c.question].target_object).unwrap();
        if c.truncated {
            assert!(t.len() < c.offset);
        } else {
            assert_eq!(t.len(), c.offset);
        }
    }
    assert_eq!(by_offset[&10], by_offset[&50]);
}

#[test]
fn answering_immediately_makes_no_progress() {
    let houses = suite(35, 5);
    let (m, mut s) = fresh(35);
    let b = m.master.head.b.unwrap();
    s.value_mut(b)[m.space.index(Subgoal::ANSWER)] = 20.0;
    let version = s.version();
    let run = eval_eqa(
        &m,
        &s,
        &houses,
        &[10, 30, 50],
        Budgets::default(),
        &[],
        1,
        Exec::Parallel,
    )
    .unwrap();
    assert_eq!(s.version(), version);
    for (e, ep) in run.metrics.iter().zip(&run.episodes) {
        assert_eq!(e.d_t, e.d0);
        assert_eq!(e.d_delta, 0.0);
        assert_eq!(ep.motions(), 0);
    }
    for k in [10, 30, 50] {
        assert_eq!(run.report.value("d_delta", &format!("T-{k}")), Some(0.0));
    }
}

#[test]
fn eqa_replays_and_rejects_training_houses() {
    let houses = suite(36, 4);
    let f = PolicyFixture::new(36);
    let run = eval_eqa(
        &f.model,
        &f.store,
        &houses,
        &[10, 30],
        Budgets::default(),
        &[],
        2,
        Exec::Sequential,
    )
    .unwrap();
    for (c, ep) in run.cases.iter().zip(&run.episodes) {
        replay_episode(&houses[c.house].0, ep).unwrap();
    }
    let again = eval_eqa(
        &f.model,
        &f.store,
        &houses,
        &[10, 30],
        Budgets::default(),
        &[],
        2,
        Exec::Parallel,
    )
    .unwrap();
    assert_eq!(run.episodes, again.episodes);
    let ids = vec![houses[2].0.id];
    assert!(matches!(
        eval_eqa(
            &f.model,
            &f.store,
            &houses,
            &[10],
            Budgets::default(),
            &ids,
            2,
            Exec::Sequential
        ),
        Err(EvalError::Overlap(_))
    ));
}

#[test]
fn replay_detects_tampering() {
    let houses = suite(37, 3);
    let f = PolicyFixture::new(37);
    let ro = Rollout {
        model: &f.model,
        store: &f.store,
        budgets: Budgets::default(),
        mode: Mode::Sample,
        sub_mode: Mode::Sample,
        rewards: RewardConfig::default(),
    };
    let (h, qs) = &houses[0];
    let spawn = nmc_core::sim::AgentState::new(
        h.rooms[0].extent.cells().next().unwrap(),
        nmc_core::sim::Heading::E,
    );
    let mut r = rng(1);
    let mut ep = ro.episode(h, &qs[0], spawn, &mut r).unwrap();
    while ep.segments.is_empty() {
        ep = ro.episode(h, &qs[0], spawn, &mut r).unwrap();
    }
    replay_episode(h, &ep).unwrap();
    let mut bad = ep.clone();
    bad.segments[0].success = !bad.segments[0].success;
    assert!(replay_episode(h, &bad).is_err());
    let mut bad = ep.clone();
    bad.d_t += 1;
    assert!(replay_episode(h, &bad).is_err());
}
