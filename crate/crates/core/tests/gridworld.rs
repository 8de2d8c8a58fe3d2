use std::collections::VecDeque;

use optionlab::dp::value_iteration;
use optionlab::gridworld::*;

/// Shortest path lengths over free cells, written against the wall mask only.
fn bfs(layout: &RoomLayout, from: Cell) -> Vec<Vec<Option<usize>>> {
    let n = layout.n();
    let mut dist = vec![vec![None; n]; n];
    dist[from.0][from.1] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[r][c].unwrap();
        for (nr, nc) in [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)] {
            if !layout.is_wall((nr, nc)) && dist[nr][nc].is_none() {
                dist[nr][nc] = Some(d + 1);
                queue.push_back((nr, nc));
            }
        }
    }
    dist
}

#[test]
fn canonical_free_cell_counts() {
    // (n − 3)² room cells plus four doors.
    for (n, free) in [(8, 29), (16, 173)] {
        assert_eq!(RoomLayout::canonical(n).unwrap().free_cells().len(), free);
    }
    assert!(RoomLayout::canonical(6).is_err());
}

#[test]
fn fixed_goal_states() {
    let w = GridConfig::default().build(0).unwrap();
    // Every free cell but the goal is a live state; one terminal.
    assert_eq!(w.n_states(), 29);
    assert_eq!(w.terminal_index(), 28);
    assert_eq!(w.goals, vec![(6, 6)]);
    assert_eq!(w.mdp.rho0().iter().filter(|&&p| p > 0.0).count(), 1);
}

#[test]
fn optimal_values_are_discounted_distances() {
    let gamma = 0.9;
    let w = GridConfig { gamma, ..GridConfig::default() }.build(0).unwrap();
    let vi = value_iteration(&w.mdp, &vec![0.0; w.n_states()], 10_000, 1e-13).unwrap();
    let dist = bfs(&w.layout, w.goals[0]);
    for s in w.live_states() {
        let StateKey::Live(gs) = w.key(s) else { unreachable!() };
        let d = dist[gs.agent.0][gs.agent.1].unwrap() as i32;
        assert!((vi.v[s] - gamma.powi(d - 1)).abs() < 1e-10, "state {s}");
    }
}

#[test]
fn random_goal_mode_enumerates_pairs() {
    let w = GridConfig { mode: GoalMode::RandomGoal, ..GridConfig::default() }.build(0).unwrap();
    // agent ≠ goal over 29 free cells, plus the terminal
    assert_eq!(w.n_states(), 29 * 28 + 1);
    let start_mass: f64 = w.mdp.rho0().iter().sum();
    assert!((start_mass - 1.0).abs() < 1e-12);
}

#[test]
fn extra_goals_are_seeded() {
    let cfg = GridConfig { goals: 4, ..GridConfig::default() };
    let a = cfg.build(3).unwrap();
    assert_eq!(a.goals, cfg.build(3).unwrap().goals);
    assert_eq!(a.goals.len(), 4);
    assert!(GridConfig { goals: 2, mode: GoalMode::RandomGoal, ..GridConfig::default() }.build(0).is_err());
}

#[test]
fn rotation_is_a_bijection_that_commutes_with_steps() {
    let w = GridConfig::default().build(0).unwrap();
    let (r, map) = w.rotated().unwrap();
    let mut seen = map.clone();
    seen.sort_unstable();
    assert_eq!(seen, (0..w.n_states()).collect::<Vec<_>>());
    for s in w.live_states() {
        for a in Action::ALL {
            let (t, rew, _) = w.step_index(s, a).unwrap();
            let (t2, rew2, _) = r.step_index(map[s], a.rotated()).unwrap();
            assert_eq!(map[t], t2);
            assert_eq!(rew, rew2);
        }
    }
}

#[test]
fn step_agrees_with_compiled_mdp() {
    let w = GridConfig::default().build(0).unwrap();
    for s in w.live_states() {
        for a in Action::ALL {
            let (t, r, _) = w.step_index(s, a).unwrap();
            assert_eq!(w.mdp.deterministic_successor(s, a.index()), Some(t));
            assert_eq!(w.mdp.reward(s, a.index()), r);
        }
    }
    assert!(w.step_index(w.terminal_index(), Action::Up).is_err());
}

#[test]
fn pgm_header_and_size() {
    let layout = RoomLayout::canonical(8).unwrap();
    let img = render_layout_pgm(&layout, Some((1, 1)), &[(6, 6)], 3);
    let header = b"P5\n24 24\n255\n";
    assert_eq!(&img[..header.len()], header);
    assert_eq!(img.len(), header.len() + 24 * 24);
    // Top-left pixel is the corner wall.
    assert_eq!(img[header.len()], 0);
}

#[test]
fn layout_json_round_trip() {
    let layout = RoomLayout::canonical(10).unwrap();
    let back = RoomLayout::from_json(&layout.to_json().unwrap()).unwrap();
    assert_eq!(back.free_cells(), layout.free_cells());
    assert_eq!(back.doors(), layout.doors());
}
