mod common;

use common::*;
use nmc_core::planner::{
    build_dataset, build_plan, lift_trajectory, room_out_degree, shortest_path,
    shortest_path_to_object, Subgoal, SubgoalSpace, Task,
};
use nmc_core::sim::layout::{Doorway, Object, Rect, Room};
use nmc_core::sim::question::question_for;
use nmc_core::sim::{
    generate_suite, step, AgentState, CellKind, Heading, HouseLayout, Motion, Pos, Vocab,
};
use nmc_core::Exec;
use rand::Rng;

/// Bedroom (one door) -> hall (three doors) -> living room with a brown
/// fireplace; a kitchen hangs off the hall.
fn worked_example_house() -> HouseLayout {
    let (w, h) = (17usize, 9usize);
    let mut grid = vec![CellKind::Wall; w * h];
    let rect = |x0, y0, x1, y1| Rect { x0, y0, x1, y1 };
    let rooms = vec![
        Room {
            id: 0,
            room_type: 2,
            extent: rect(1, 1, 3, 3),
        },
        Room {
            id: 1,
            room_type: 0,
            extent: rect(5, 1, 11, 3),
        },
        Room {
            id: 2,
            room_type: 1,
            extent: rect(13, 1, 15, 3),
        },
        Room {
            id: 3,
            room_type: 3,
            extent: rect(5, 5, 11, 7),
        },
    ];
    for r in &rooms {
        for p in r.extent.cells() {
            grid[p.y as usize * w + p.x as usize] = CellKind::Free;
        }
    }
    let doors = vec![
        Doorway {
            id: 0,
            cell: Pos::new(4, 2),
            room_a: 0,
            room_b: 1,
        },
        Doorway {
            id: 1,
            cell: Pos::new(12, 2),
            room_a: 1,
            room_b: 2,
        },
        Doorway {
            id: 2,
            cell: Pos::new(8, 4),
            room_a: 1,
            room_b: 3,
        },
    ];
    for d in &doors {
        grid[d.cell.y as usize * w + d.cell.x as usize] = CellKind::Doorway;
    }
    let objects = vec![
        Object {
            id: 0,
            object_type: 0,
            color: 6,
            cell: Pos::new(15, 2),
            room: 2,
        },
        Object {
            id: 1,
            object_type: 1,
            color: 2,
            cell: Pos::new(9, 7),
            room: 3,
        },
    ];
    HouseLayout::from_parts(42, w, h, grid, rooms, doors, objects, small_vocab()).unwrap()
}

#[test]
fn worked_example_plan() {
    let house = worked_example_house();
    let q = question_for(&house, 0, 0, 8);
    assert_eq!(q.text(), "what color is the fireplace?");
    let rec = build_plan(&house, &q, AgentState::new(Pos::new(1, 2), Heading::E)).unwrap();
    let vocab = Vocab::new(house.vocab);
    assert_eq!(
        rec.subgoal_tokens,
        [
            "exit-room",
            "find-room[living]",
            "find-object[fireplace]",
            "answer"
        ]
    );
    assert_eq!(
        rec.plan.subgoals(),
        vec![
            Subgoal::EXIT_ROOM,
            Subgoal::find_room(1),
            Subgoal::find_object(0),
            Subgoal::ANSWER
        ]
    );
    assert_eq!(vocab.colors[q.answer], "brown");
}

#[test]
fn same_room_spawn_is_find_object_then_answer() {
    let house = worked_example_house();
    let q = question_for(&house, 0, 0, 8);
    let rec = build_plan(&house, &q, AgentState::new(Pos::new(13, 1), Heading::S)).unwrap();
    assert_eq!(
        rec.plan.subgoals(),
        vec![Subgoal::find_object(0), Subgoal::ANSWER]
    );
}

#[test]
fn out_degree_examples() {
    let house = worked_example_house();
    assert_eq!(room_out_degree(&house, 0, None), 1);
    assert_eq!(room_out_degree(&house, 1, Some(0)), 2);
    assert_eq!(room_out_degree(&house, 1, None), 3);
    assert_eq!(room_out_degree(&house, 2, Some(1)), 0);
    // A two-door room entered through one of them.
    let suites = generate_suite(1, 60, 1, 8, &small_gen()).unwrap();
    let (h, room) = suites
        .iter()
        .find_map(|(h, _)| {
            h.rooms
                .iter()
                .find(|r| h.doors_of(r.id).count() == 2)
                .map(|r| (h, r.id))
        })
        .expect("a two-door room");
    let entry = h.doors_of(room).next().unwrap().id;
    assert_eq!(room_out_degree(h, room, Some(entry)), 1);
    assert_eq!(room_out_degree(h, room, None), 2);
}

#[test]
fn path_examples() {
    let house = worked_example_house();
    let fire = Pos::new(15, 2);
    // Already in range and facing the object: empty plan.
    let t = shortest_path(&house, AgentState::new(Pos::new(13, 2), Heading::E), fire).unwrap();
    assert!(t.is_empty());
    // Facing away: two turns the same way (left is preferred on ties).
    let t = shortest_path(&house, AgentState::new(Pos::new(13, 2), Heading::W), fire).unwrap();
    assert_eq!(t.actions(), vec![Motion::TurnLeft, Motion::TurnLeft]);
    assert!(shortest_path(&house, AgentState::new(Pos::new(0, 0), Heading::E), fire).is_err());
}

#[test]
fn shortest_paths_match_exhaustive_search() {
    let houses = generate_suite(11, 40, 2, 8, &small_gen()).unwrap();
    let mut r = rng(4);
    for i in 0..200 {
        let (house, qs) = &houses[i % houses.len()];
        let q = &qs[r.gen_range(0..qs.len())];
        let cells = house.traversable_cells();
        let start = AgentState::new(
            cells[r.gen_range(0..cells.len())],
            Heading::from_index(r.gen_range(0..4)),
        );
        let traj = shortest_path_to_object(house, start, q.target_object).unwrap();
        let best = pose_search(house, start, |s| reached(house, q, s)).unwrap();
        assert_eq!(traj.len(), best, "instance {i}");
        // The trajectory is executable and ends at the goal.
        let mut s = start;
        for (st, m) in &traj.steps {
            assert_eq!(*st, s);
            let (n, collided) = step(house, s, *m);
            assert!(!collided);
            s = n;
        }
        assert_eq!(s, traj.terminal);
        assert!(reached(house, q, &s));
    }
}

#[test]
fn lifting_matches_rule_replay_on_1000_pairs() {
    let houses = generate_suite(21, 400, 4, 8, &small_gen()).unwrap();
    let pairs: Vec<_> = houses
        .iter()
        .flat_map(|(h, qs)| qs.iter().map(move |q| (h, q)))
        .take(1000)
        .collect();
    assert_eq!(pairs.len(), 1000);
    let mut r = rng(8);
    let mut exits = 0;
    for (house, q) in pairs {
        let cells: Vec<Pos> = house
            .rooms
            .iter()
            .flat_map(|r| r.extent.cells().collect::<Vec<_>>())
            .collect();
        let spawn = AgentState::new(
            cells[r.gen_range(0..cells.len())],
            Heading::from_index(r.gen_range(0..4)),
        );
        let rec = build_plan(house, q, spawn).unwrap();
        check_partition(&rec.plan, rec.actions.len());
        let got: Vec<_> = rec
            .plan
            .segments
            .iter()
            .map(|s| (s.subgoal, s.start, s.end))
            .collect();
        assert_eq!(got, replay_labels(house, &rec.states, q));
        let target_room = house.objects[q.target_object].room;
        for s in &rec.plan.segments {
            match s.subgoal.task {
                Task::ExitRoom => {
                    exits += 1;
                    assert_eq!(room_out_degree(house, s.room, s.entry_door), 1);
                }
                Task::FindObject => {
                    for st in &rec.states[s.start..=s.end] {
                        assert_eq!(house.room_at(st.cell), Some(target_room));
                    }
                }
                _ => {}
            }
        }
        // Lifting the stored trajectory again is stable.
        assert_eq!(
            lift_trajectory(house, &rec.trajectory(), q).unwrap(),
            rec.plan
        );
    }
    assert!(exits > 0);
}

#[test]
fn lifting_rejects_trajectory_that_misses_the_target() {
    let house = worked_example_house();
    let q = question_for(&house, 0, 0, 8);
    let rec = build_plan(&house, &q, AgentState::new(Pos::new(1, 2), Heading::E)).unwrap();
    let states = &rec.states[..rec.states.len() - 6];
    let short =
        nmc_core::planner::ExpertTrajectory::from_states(states, &rec.actions[..states.len() - 1]);
    assert!(lift_trajectory(&house, &short, &q).is_err());
}

#[test]
fn dataset_counts_and_keying() {
    let house = worked_example_house();
    let q = question_for(&house, 0, 0, 8);
    let corpus = build_dataset(&[(house.clone(), vec![q])], 1, 1, Exec::Sequential).unwrap();
    assert_eq!(corpus.num_plans(), 1);
    let plan = &corpus.plans[0].plan;
    assert_eq!(corpus.num_segments(), plan.segments.len());
    assert_eq!(corpus.master_sequences()[0].1.len(), plan.segments.len());
    assert_eq!(plan.motion_segments().count() + 1, plan.segments.len());

    let houses = generate_suite(5, 100, 2, 8, &small_gen()).unwrap();
    let corpus = build_dataset(&houses, 1, 3, Exec::Sequential).unwrap();
    assert!(corpus.num_segments() > corpus.num_plans());
    for (g, demos) in corpus.subpolicy_demos() {
        for d in demos {
            let seg = d
                .record
                .plan
                .segments
                .iter()
                .find(|s| s.start == d.start && s.end == d.end)
                .unwrap();
            assert_eq!(seg.subgoal, g);
        }
    }
    let space = SubgoalSpace::new(small_vocab());
    assert_eq!(space.len(), 12 + 6 + 2);
    assert!(build_dataset(&[], 1, 1, Exec::Sequential).is_err());
}

#[test]
fn dataset_is_independent_of_execution_mode() {
    let houses = generate_suite(6, 12, 2, 8, &small_gen()).unwrap();
    let a = build_dataset(&houses, 2, 1, Exec::Sequential).unwrap();
    let b = build_dataset(&houses, 2, 1, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn find_object_share_falls_with_distance() {
    let houses = generate_suite(9, 100, 2, 8, &small_gen()).unwrap();
    let corpus = build_dataset(&houses, 4, 2, Exec::Sequential).unwrap();
    let by_id: std::collections::HashMap<u64, &HouseLayout> =
        houses.iter().map(|(h, _)| (h.id, h)).collect();
    // Step counts per 4-cell distance bucket: (find-object, total).
    let mut buckets = vec![(0usize, 0usize); 16];
    for rec in &corpus.plans {
        let house = by_id[&rec.house_id];
        let target = house.objects[rec.question.target_object].cell;
        for seg in rec.plan.motion_segments() {
            for t in seg.start..seg.end {
                let d = bfs_distance(house, rec.states[t].cell, target).unwrap() as usize;
                let b = &mut buckets[(d / 4).min(15)];
                b.1 += 1;
                b.0 += (seg.subgoal.task == Task::FindObject) as usize;
            }
        }
    }
    let shares: Vec<f64> = buckets
        .iter()
        .filter(|b| b.1 >= 200)
        .map(|&(f, n)| f as f64 / n as f64)
        .collect();
    assert!(shares.len() >= 3, "{buckets:?}");
    for w in shares.windows(2) {
        assert!(w[1] <= w[0], "{shares:?}");
    }
}
