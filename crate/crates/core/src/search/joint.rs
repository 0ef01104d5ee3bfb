//! Joint action generation with vertex and swap conflict filtering.

use crate::grid::{Action, Cell, GridMap};

/// One action per agent, agent order.
pub type JointAction = Vec<Action>;

/// True if moving from `from` to `to` (per agent) puts two agents in one
/// cell or makes two agents exchange cells.
pub fn has_conflict(from: &[Cell], to: &[Cell]) -> bool {
    let n = to.len();
    for a in 0..n {
        for b in a + 1..n {
            if to[a] == to[b] {
                return true;
            }
            if to[a] == from[b] && to[b] == from[a] {
                return true;
            }
        }
    }
    false
}

/// Conflict-free joint actions from `positions`, lexicographic in the
/// canonical action order.
///
/// Each agent uses its feasible moves (Idle only when boxed in). If that
/// leaves no conflict-free combination, Idle is added for every agent; the
/// all-Idle joint action is always conflict-free for distinct positions.
pub fn joint_children(map: &GridMap, positions: &[Cell]) -> Vec<(JointAction, Vec<Cell>)> {
    let per_agent: Vec<Vec<Action>> = positions.iter().map(|&c| map.feasible_actions(c)).collect();
    let children = product(map, positions, &per_agent);
    if !children.is_empty() {
        return children;
    }
    let relaxed: Vec<Vec<Action>> = per_agent
        .into_iter()
        .map(|mut acts| {
            if !acts.contains(&Action::Idle) {
                acts.push(Action::Idle);
            }
            acts
        })
        .collect();
    product(map, positions, &relaxed)
}

fn product(map: &GridMap, positions: &[Cell], per_agent: &[Vec<Action>]) -> Vec<(JointAction, Vec<Cell>)> {
    let n = positions.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    if per_agent.iter().any(Vec::is_empty) {
        return out;
    }
    loop {
        let actions: JointAction = (0..n).map(|a| per_agent[a][idx[a]]).collect();
        let targets: Vec<Cell> = (0..n)
            .map(|a| map.step(positions[a], actions[a]).unwrap_or(positions[a]))
            .collect();
        if !has_conflict(positions, &targets) {
            out.push((actions, targets));
        }
        let mut d = n;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < per_agent[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conflicts() {
        assert!(has_conflict(&[Cell(0), Cell(2)], &[Cell(1), Cell(1)]));
        assert!(has_conflict(&[Cell(0), Cell(1)], &[Cell(1), Cell(0)]));
        // Following into a vacated cell is fine.
        assert!(!has_conflict(&[Cell(0), Cell(1)], &[Cell(1), Cell(2)]));
    }

    #[test]
    fn children_are_lexicographic_and_conflict_free() {
        let map = GridMap::empty(3, 3, "e").unwrap();
        let pos = [Cell(0), Cell(1)];
        let kids = joint_children(&map, &pos);
        assert!(!kids.is_empty());
        for w in kids.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
        for (_, to) in &kids {
            assert!(!has_conflict(&pos, to));
        }
        // agent 0 at a corner has 2 moves, agent 1 on an edge has 3; minus conflicts.
        assert!(kids.len() < 6);
    }

    #[test]
    fn corridor_swap_falls_back_to_idle() {
        let map = GridMap::empty(2, 1, "corridor").unwrap();
        let kids = joint_children(&map, &[Cell(0), Cell(1)]);
        assert_eq!(kids.len(), 1);
        assert_eq!(kids[0].0, vec![Action::Idle, Action::Idle]);
    }
}
