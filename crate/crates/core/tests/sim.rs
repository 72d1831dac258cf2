mod common;

use common::*;
use nmc_core::sim::io::HouseFile;
use nmc_core::sim::layout::{Object, Rect, Room};
use nmc_core::sim::{
    generate_house, generate_question, generate_suite, geodesic_distance, observe, step,
    AgentState, CellKind, FeatureLayout, GenConfig, Heading, HouseLayout, Motion, Pos, Vocab,
};
use proptest::prelude::*;
use rand::Rng;

fn house7() -> HouseLayout {
    generate_house(7, &GenConfig::default()).unwrap()
}

#[test]
fn same_seed_gives_byte_identical_layout() {
    let (a, b) = (house7(), house7());
    assert_eq!(
        HouseFile::new(&a, vec![]).to_json(),
        HouseFile::new(&b, vec![]).to_json()
    );
}

#[test]
fn room_graph_is_connected_by_traversal() {
    for seed in 0..200 {
        let h = generate_house(seed, &GenConfig::default()).unwrap();
        // Adjacency rebuilt from the doorway list, not from room_graph.
        let mut adj = vec![Vec::new(); h.rooms.len()];
        for d in &h.doorways {
            assert_ne!(d.room_a, d.room_b);
            adj[d.room_a].push(d.room_b);
            adj[d.room_b].push(d.room_a);
        }
        let mut seen = vec![false; h.rooms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(r) = stack.pop() {
            for &n in &adj[r] {
                if !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        assert!(seen.iter().all(|&s| s), "seed {seed}");
    }
}

#[test]
fn generated_houses_satisfy_layout_invariants() {
    for seed in 0..200 {
        let h = generate_house(seed, &small_gen()).unwrap();
        h.validate().unwrap();
        for y in 0..h.height as i32 {
            for x in 0..h.width as i32 {
                let p = Pos::new(x, y);
                let owners = h.rooms.iter().filter(|r| r.extent.contains(p)).count();
                match h.cell(p) {
                    CellKind::Free => assert_eq!(owners, 1, "seed {seed} cell {p:?}"),
                    _ => assert_eq!(owners, 0),
                }
            }
        }
        for o in &h.objects {
            assert_eq!(h.cell(o.cell), CellKind::Free);
            assert_eq!(h.room_at(o.cell), Some(o.room));
            assert!(o.object_type < h.vocab.object_types && o.color < h.vocab.colors);
        }
        assert!(h.rooms.iter().all(|r| r.room_type < h.vocab.room_types));
    }
}

#[test]
fn single_room_config() {
    let h = generate_house(
        7,
        &GenConfig {
            rooms_min: 1,
            rooms_max: 1,
            ..GenConfig::default()
        },
    )
    .unwrap();
    assert_eq!(h.rooms.len(), 1);
    assert_eq!(h.room_graph(), vec![Vec::<usize>::new()]);
}

#[test]
fn impossible_config_is_an_error() {
    let cfg = GenConfig {
        width: 5,
        height: 5,
        rooms_min: 6,
        rooms_max: 6,
        ..GenConfig::default()
    };
    assert!(generate_house(1, &cfg).is_err());
}

/// 7x3 grid with a single corridor room along y = 1.
fn corridor() -> HouseLayout {
    let (w, h) = (7, 3);
    let mut grid = vec![CellKind::Wall; w * h];
    for x in 1..6 {
        grid[w + x] = CellKind::Free;
    }
    let room = Room {
        id: 0,
        room_type: 0,
        extent: Rect {
            x0: 1,
            y0: 1,
            x1: 5,
            y1: 1,
        },
    };
    let obj = Object {
        id: 0,
        object_type: 0,
        color: 6,
        cell: Pos::new(5, 1),
        room: 0,
    };
    HouseLayout::from_parts(1, w, h, grid, vec![room], vec![], vec![obj], small_vocab()).unwrap()
}

#[test]
fn step_examples() {
    let h = corridor();
    let s = AgentState::new(Pos::new(2, 1), Heading::E);
    assert_eq!(
        step(&h, s, Motion::Forward),
        (AgentState::new(Pos::new(3, 1), Heading::E), false)
    );
    let n = AgentState::new(Pos::new(2, 1), Heading::N);
    assert_eq!(
        step(&h, n, Motion::TurnLeft),
        (AgentState::new(Pos::new(2, 1), Heading::W), false)
    );
    assert_eq!(
        step(&h, n, Motion::TurnRight),
        (AgentState::new(Pos::new(2, 1), Heading::E), false)
    );
    assert_eq!(step(&h, n, Motion::Forward), (n, true));
}

#[test]
fn facing_wall_marks_forward_patch_cell() {
    let h = corridor();
    let layout = FeatureLayout::new(h.vocab);
    let s = AgentState::new(Pos::new(2, 1), Heading::N);
    let v = observe(&h, &s);
    assert_eq!(v[layout.patch_index(1, 0)], 1.0);
    assert_eq!(v[layout.patch_index(0, 0)], 0.0);
    assert_eq!(v, observe(&h, &s));
    let e = observe(&h, &AgentState::new(Pos::new(2, 1), Heading::E));
    assert_eq!(e[layout.patch_index(1, 0)], 0.0);
    assert_eq!(e[layout.objects], 1.0);
    assert_eq!(e[layout.color + 6], 1.0);
}

#[test]
fn object_features_match_ray_cast_oracle() {
    let mut r = rng(5);
    let mut positives = 0;
    for seed in 0..40 {
        let h = generate_house(seed, &small_gen()).unwrap();
        let layout = FeatureLayout::new(h.vocab);
        let cells = h.traversable_cells();
        for _ in 0..50 {
            let s = AgentState::new(
                cells[r.gen_range(0..cells.len())],
                Heading::from_index(r.gen_range(0..4)),
            );
            let v = observe(&h, &s);
            assert_eq!(v.len(), layout.dim);
            assert!(v.iter().all(|x| x.is_finite()));
            for t in 0..h.vocab.object_types {
                let want = h
                    .objects
                    .iter()
                    .any(|o| o.object_type == t && visible_oracle(&h, &s, o.cell));
                assert_eq!(
                    v[layout.objects + t] == 1.0,
                    want,
                    "seed {seed} {s:?} type {t}"
                );
                positives += want as usize;
            }
        }
    }
    assert!(positives > 100);
}

#[test]
fn geodesic_examples_and_bfs_oracle() {
    let h = house7();
    let cells = h.traversable_cells();
    let a = cells[0];
    assert_eq!(geodesic_distance(&h, a, a).unwrap(), 0);
    let adj = cells.iter().find(|c| c.manhattan(a) == 1).unwrap();
    assert_eq!(geodesic_distance(&h, a, *adj).unwrap(), 1);
    let mut r = rng(17);
    for _ in 0..300 {
        let p = cells[r.gen_range(0..cells.len())];
        let q = cells[r.gen_range(0..cells.len())];
        assert_eq!(
            Some(geodesic_distance(&h, p, q).unwrap()),
            bfs_distance(&h, p, q)
        );
    }
}

#[test]
fn geodesic_rejects_wall_cells() {
    let h = corridor();
    assert!(geodesic_distance(&h, Pos::new(0, 0), Pos::new(2, 1)).is_err());
}

#[test]
fn questions_have_correct_answers() {
    let vocab_sizes = small_vocab();
    let vocab = Vocab::new(vocab_sizes);
    let mut n = 0;
    let mut qualified = 0;
    let mut r = rng(2);
    let mut seed = 0;
    while n < 1000 {
        let h = generate_house(seed, &small_gen()).unwrap();
        seed += 1;
        let Ok(q) = generate_question(&h, &mut r, 0, 16) else {
            continue;
        };
        let o = &h.objects[q.target_object];
        assert_eq!(q.answer, o.color);
        assert_eq!(q.target_room, o.room);
        assert_eq!(q.tokens[..4], ["what", "color", "is", "the"]);
        assert_eq!(q.tokens[4], vocab.objects[o.object_type]);
        let elsewhere = h
            .objects
            .iter()
            .any(|p| p.object_type == o.object_type && p.room != o.room);
        assert_eq!(q.tokens.len() > 5, elsewhere);
        if elsewhere {
            qualified += 1;
            assert_eq!(q.tokens[5..7], ["in", "the"]);
        }
        assert_eq!(
            h.objects_in(o.room)
                .filter(|p| p.object_type == o.object_type)
                .count(),
            1
        );
        n += 1;
    }
    assert!(qualified > 0);
}

#[test]
fn fireplace_question_template() {
    let mut h = corridor();
    h.objects[0].color = 6;
    let q = generate_question(&h, &mut rng(0), 0, 8).unwrap();
    assert_eq!(q.text(), "what color is the fireplace?");
    assert_eq!(Vocab::new(h.vocab).colors[q.answer], "brown");
}

#[test]
fn suite_is_deterministic() {
    let a = generate_suite(3, 5, 2, 16, &small_gen()).unwrap();
    let b = generate_suite(3, 5, 2, 16, &small_gen()).unwrap();
    assert_eq!(a, b);
}

/// Random walk that records every state.
fn walk(h: &HouseLayout, seed: u64, n: usize) -> Vec<(AgentState, Motion, AgentState, bool)> {
    let mut r = rng(seed);
    let cells = h.traversable_cells();
    let mut s = AgentState::new(cells[r.gen_range(0..cells.len())], Heading::N);
    let mut out = Vec::new();
    for _ in 0..n {
        let m = Motion::ALL[r.gen_range(0..3)];
        let (t, c) = step(h, s, m);
        out.push((s, m, t, c));
        s = t;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steps_stay_on_traversable_cells(seed in 0u64..1000, walk_seed in 0u64..1000) {
        let h = generate_house(seed, &small_gen()).unwrap();
        for (s, m, t, c) in walk(&h, walk_seed, 200) {
            prop_assert!(h.is_traversable(t.cell));
            match m {
                Motion::Forward => {
                    prop_assert_eq!(c, !h.is_traversable(s.ahead()));
                    prop_assert_eq!(t.heading, s.heading);
                }
                _ => {
                    prop_assert!(!c);
                    prop_assert_eq!(t.cell, s.cell);
                }
            }
        }
    }

    #[test]
    fn geodesic_is_a_metric(seed in 0u64..1000, a in 0usize..10_000, b in 0usize..10_000, c in 0usize..10_000) {
        let h = generate_house(seed, &small_gen()).unwrap();
        let cells = h.traversable_cells();
        let (p, q, r) = (cells[a % cells.len()], cells[b % cells.len()], cells[c % cells.len()]);
        let d = |x, y| geodesic_distance(&h, x, y).unwrap();
        prop_assert_eq!(d(p, q), d(q, p));
        prop_assert!(d(p, r) <= d(p, q) + d(q, r));
        prop_assert_eq!(d(p, q) == 0, p == q);
    }

    #[test]
    fn observation_is_deterministic(seed in 0u64..500) {
        let a = generate_house(seed, &small_gen()).unwrap();
        let b = generate_house(seed, &small_gen()).unwrap();
        for (s, _, _, _) in walk(&a, seed, 20) {
            prop_assert_eq!(observe(&a, &s), observe(&b, &s));
        }
    }
}

#[test]
fn bfs_oracle_on_corridor() {
    let h = corridor();
    assert_eq!(bfs_distance(&h, Pos::new(1, 1), Pos::new(5, 1)), Some(4));
}
