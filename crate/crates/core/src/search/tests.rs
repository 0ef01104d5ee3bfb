use super::*;
use crate::belief::{GpHyperparams, Observation, PhenomenonParams};
use crate::info_gain::GainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gain() -> InfoGain {
    InfoGain::new(GainConfig::default()).unwrap()
}

/// Exhaustive maximum over collision-free joint sequences; plain recursion.
fn brute_force(gain: &InfoGain, belief: &BeliefState, map: &GridMap, positions: &[Cell], horizon: usize) -> f64 {
    fn rec(
        gain: &InfoGain,
        belief: &BeliefState,
        map: &GridMap,
        positions: &[Cell],
        left: usize,
        committed: &mut Vec<Cell>,
        best: &mut f64,
    ) {
        if left == 0 {
            *best = best.max(gain.expected_gain_cells(belief, committed).unwrap());
            return;
        }
        for (_, targets) in joint_children(map, positions) {
            let n = committed.len();
            committed.extend(&targets);
            rec(gain, belief, map, &targets, left - 1, committed, best);
            committed.truncate(n);
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(gain, belief, map, positions, horizon, &mut Vec::new(), &mut best);
    best
}

fn random_instance(rng: &mut ChaCha8Rng, map: &GridMap, agents: usize) -> (BeliefState, Vec<Cell>) {
    let mut belief = BeliefState::prior(map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let cells: Vec<Cell> = map.passable_cells().collect();
    let mut positions = Vec::new();
    while positions.len() < agents {
        let c = cells[rng.random_range(0..cells.len())];
        if !positions.contains(&c) {
            positions.push(c);
        }
    }
    for t in 0..rng.random_range(0..8) {
        let cell = cells[rng.random_range(0..cells.len())];
        belief.observe(Observation { agent: 0, time: t, cell, value: rng.random_range(0.6..2.1) }).unwrap();
    }
    (belief, positions)
}

#[test]
fn heuristic_is_zero_at_horizon() {
    let map = GridMap::empty(4, 4, "e").unwrap();
    let b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let hv = h_value(&gain(), &b, &map, &[Cell(0), Cell(5)], 2, 2).unwrap();
    assert_eq!(hv.h, 0.0);
}

#[test]
fn single_agent_heuristic_is_best_gain() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let map = GridMap::empty(5, 5, "e").unwrap();
    for _ in 0..10 {
        let (b, pos) = random_instance(&mut rng, &map, 1);
        let hv = h_value(&gain(), &b, &map, &pos, 0, 2).unwrap();
        let fwd = single_agent_forward_search(&gain(), &b, &map, pos[0], 2).unwrap();
        assert_eq!(hv.h, fwd.value);
    }
}

#[test]
fn root_heuristic_bounds_every_leaf() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let map = GridMap::empty(8, 8, "e").unwrap();
    for _ in 0..20 {
        let (b, pos) = random_instance(&mut rng, &map, 2);
        let hv = h_value(&gain(), &b, &map, &pos, 0, 2).unwrap();
        let best = brute_force(&gain(), &b, &map, &pos, 2);
        assert!(hv.h + 1e-9 >= best, "{} < {}", hv.h, best);
    }
}

#[test]
fn teammate_forced_idle_is_bounded() {
    // .@.
    // @..
    // .@.   agents 4 and 2 can both only reach cell 5; 6 is boxed in.
    let map = GridMap::parse("type octile\nheight 3\nwidth 3\nmap\n.@.\n@..\n.@.\n", "t").unwrap();
    let mut b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    // The only targets are well known, so re-observing one's own cell is
    // each agent's best second step.
    for t in 0..12 {
        for c in [5, 8] {
            b.observe(Observation { agent: 0, time: t, cell: Cell(c), value: 1.0 }).unwrap();
        }
    }
    let pos = [Cell(4), Cell(6), Cell(2)];
    let hv = h_value(&gain(), &b, &map, &pos, 0, 2).unwrap();
    let best = brute_force(&gain(), &b, &map, &pos, 2);
    assert!(hv.h + 1e-9 >= best, "{} < {}", hv.h, best);
    let out = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(2)).unwrap();
    assert!((out.plan.value - best).abs() < 1e-9);
}

#[test]
fn forward_search_tie_break_is_canonical() {
    let map = GridMap::empty(5, 5, "e").unwrap();
    let b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let plan = single_agent_forward_search(&gain(), &b, &map, Cell(12), 2).unwrap();
    assert_eq!(plan.actions, vec![vec![Action::Up, Action::Up]]);
    let plan = single_agent_forward_search(&gain(), &b, &map, Cell(0), 1).unwrap();
    assert_eq!(plan.actions, vec![vec![Action::Down]]);
}

#[test]
fn horizon_one_is_argmax_over_neighbours() {
    let map = GridMap::empty(3, 3, "e").unwrap();
    let mut b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    // Make everything but the right neighbour well known.
    for (t, c) in [1usize, 3, 7].into_iter().enumerate() {
        for k in 0..3 {
            b.observe(Observation { agent: 0, time: (t * 3 + k) as u32, cell: Cell(c), value: 1.0 }).unwrap();
        }
    }
    let plan = single_agent_forward_search(&gain(), &b, &map, Cell(4), 1).unwrap();
    assert_eq!(plan.actions[0], vec![Action::Right]);
    let direct = gain().expected_gain_cells(&b, &[Cell(5)]).unwrap();
    assert_eq!(plan.value, direct);
}

#[test]
fn singleton_bubble_matches_forward_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let map = GridMap::empty(6, 6, "e").unwrap();
        let (b, pos) = random_instance(&mut rng, &map, 1);
        let horizon = 1 + trial % 3;
        let fwd = single_agent_forward_search(&gain(), &b, &map, pos[0], horizon).unwrap();
        let ma = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(horizon)).unwrap();
        assert_eq!(ma.plan.actions, fwd.actions, "trial {trial}");
        assert_eq!(ma.plan.value, fwd.value);
    }
    // Flat prior: every plan ties.
    let map = GridMap::empty(5, 5, "e").unwrap();
    let b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let ma = multi_agent_search(&gain(), &b, &map, &[Cell(12)], SearchConfig::new(2)).unwrap();
    assert_eq!(ma.plan.actions, vec![vec![Action::Up, Action::Up]]);
}

#[test]
fn two_agent_search_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let map = GridMap::empty(8, 8, "e").unwrap();
    for trial in 0..15 {
        let (b, pos) = random_instance(&mut rng, &map, 2);
        let out = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(2)).unwrap();
        let oracle = brute_force(&gain(), &b, &map, &pos, 2);
        assert!((out.plan.value - oracle).abs() < 1e-9, "trial {trial}: {} vs {oracle}", out.plan.value);
        assert!(!out.plan.has_conflict(&pos));
        let recomputed = gain().expected_gain(&b, &crate::info_gain::ObservationPlan { paths: out.plan.paths.clone() }).unwrap();
        assert_eq!(recomputed, out.plan.value);
    }
}

#[test]
fn pruning_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let map = GridMap::empty(8, 8, "e").unwrap();
    for _ in 0..10 {
        let (b, pos) = random_instance(&mut rng, &map, 2);
        let on = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(2)).unwrap();
        let off = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig { pruning: false, ..SearchConfig::new(2) }).unwrap();
        assert!((on.plan.value - off.plan.value).abs() < 1e-9);
        assert!(on.stats.nodes_generated <= off.stats.nodes_generated);
        assert!(on.stats.nodes_expanded <= on.stats.nodes_generated);
        assert!(off.stats.nodes_generated <= off.stats.max_possible_nodes);
    }
}

#[test]
fn tight_heuristic_finds_same_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let map = GridMap::empty(6, 6, "e").unwrap();
    for _ in 0..8 {
        let (b, pos) = random_instance(&mut rng, &map, 2);
        let loose = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(2)).unwrap();
        let tight =
            multi_agent_search(&gain(), &b, &map, &pos, SearchConfig { tight_heuristic: true, ..SearchConfig::new(2) }).unwrap();
        assert!((loose.plan.value - tight.plan.value).abs() < 1e-9);
    }
}

#[test]
fn hotspot_gets_exactly_one_visitor() {
    // 5x5, agents either side of an unexplored centre cell. Everything else
    // is well observed except two cells on agent 1's side.
    let map = GridMap::empty(5, 5, "e").unwrap();
    let mut b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let hotspot = map.cell_at(2, 2).unwrap();
    let fresh = [hotspot, map.cell_at(2, 4).unwrap(), map.cell_at(1, 4).unwrap()];
    let mut t = 0;
    for cell in map.passable_cells().filter(|c| !fresh.contains(c)) {
        for _ in 0..4 {
            b.observe(Observation { agent: 0, time: t, cell, value: 1.0 }).unwrap();
            t += 1;
        }
    }
    let pos = [map.cell_at(2, 1).unwrap(), map.cell_at(2, 3).unwrap()];
    let out = multi_agent_search(&gain(), &b, &map, &pos, SearchConfig::new(2)).unwrap();
    let visitors = out.plan.paths.iter().filter(|p| p.contains(&hotspot)).count();
    assert_eq!(visitors, 1, "{:?}", out.plan.paths);
    assert!((out.plan.value - brute_force(&gain(), &b, &map, &pos, 2)).abs() < 1e-9);
}

#[test]
fn boxed_in_agents_idle() {
    let map = GridMap::empty(2, 1, "corridor").unwrap();
    let b = BeliefState::prior(&map, GpHyperparams::default(), PhenomenonParams::default()).unwrap();
    let out = multi_agent_search(&gain(), &b, &map, &[Cell(0), Cell(1)], SearchConfig::new(2)).unwrap();
    assert_eq!(out.plan.actions, vec![vec![Action::Idle; 2]; 2]);
}

#[test]
fn max_possible_nodes_formula() {
    assert_eq!(max_possible_nodes(2, 2), 25 + 625);
    assert_eq!(max_possible_nodes(1, 3), 5 + 25 + 125);
}
