//! UCT over joint actions, the Monte-Carlo counterpart of the joint planner.
//!
//! Tree nodes are joint states up to the planning horizon. Untried children
//! are expanded in canonical order, rollouts pick uniformly among
//! conflict-free joint actions, and the leaf is scored by the expected gain
//! of the whole rolled-out plan. A subtree whose every node has been
//! expanded is marked complete and never selected again: its value can no
//! longer change.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::grid::{Action, Cell, GridMap};
use crate::info_gain::{GainError, InfoGain};
use crate::search::{joint_children, max_possible_nodes, JointAction, JointPlan, SearchOutcome, SearchStats};

/// Statistic a node reports to its parent.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backup {
    #[default]
    Mean,
    Max,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MctsConfig {
    pub iterations: usize,
    pub exploration: f64,
    pub backup: Backup,
}

impl Default for MctsConfig {
    fn default() -> Self {
        MctsConfig { iterations: 500, exploration: 1.0, backup: Backup::Mean }
    }
}

struct TreeNode {
    depth: usize,
    positions: Vec<Cell>,
    actions: Vec<Vec<Action>>,
    paths: Vec<Vec<Cell>>,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Canonical order, consumed from the front.
    untried: std::collections::VecDeque<(JointAction, Vec<Cell>)>,
    visits: u64,
    total: f64,
    max: f64,
    complete: bool,
    /// Best full plan seen through this node.
    best: Option<(f64, Vec<Vec<Action>>, Vec<Vec<Cell>>)>,
}

impl TreeNode {
    fn value(&self, backup: Backup) -> f64 {
        match backup {
            Backup::Mean => self.total / self.visits as f64,
            Backup::Max => self.max,
        }
    }
}

/// Per-node mean and max, exposed for inspection.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct NodeSummary {
    pub depth: usize,
    pub visits: u64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MctsOutcome {
    pub outcome: SearchOutcome,
    pub iterations_run: usize,
    pub nodes: Vec<NodeSummary>,
    /// Largest leaf value any rollout produced.
    pub max_leaf: f64,
}

/// Runs `config.iterations` UCT iterations (fewer if the tree is exhausted)
/// and returns the best root child's best seen plan.
pub fn mcts_search<R: Rng>(
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    positions: &[Cell],
    horizon: usize,
    config: &MctsConfig,
    rng: &mut R,
) -> Result<MctsOutcome, GainError> {
    let m = positions.len();
    let mut stats = SearchStats { max_possible_nodes: max_possible_nodes(m, horizon), ..Default::default() };
    let mut g_cache: HashMap<Vec<Cell>, f64> = HashMap::new();
    let mut g = |paths: &[Vec<Cell>]| -> Result<f64, GainError> {
        let mut cells: Vec<Cell> = paths.iter().flatten().copied().collect();
        cells.sort_unstable();
        if let Some(&v) = g_cache.get(&cells) {
            return Ok(v);
        }
        let v = gain.expected_gain_cells(belief, &cells)?;
        g_cache.insert(cells, v);
        Ok(v)
    };

    let mut tree = vec![TreeNode {
        depth: 0,
        positions: positions.to_vec(),
        actions: vec![Vec::new(); m],
        paths: vec![Vec::new(); m],
        parent: None,
        children: Vec::new(),
        untried: if horizon > 0 { joint_children(map, positions).into() } else { Default::default() },
        visits: 0,
        total: 0.0,
        max: f64::NEG_INFINITY,
        complete: horizon == 0,
        best: None,
    }];
    let mut max_leaf = f64::NEG_INFINITY;
    let mut iterations_run = 0;

    for _ in 0..config.iterations {
        if tree[0].complete {
            break;
        }
        iterations_run += 1;

        // Selection.
        let mut idx = 0;
        while tree[idx].depth < horizon && tree[idx].untried.is_empty() {
            let parent_visits = tree[idx].visits.max(1) as f64;
            let mut pick: Option<(f64, usize)> = None;
            for &c in &tree[idx].children {
                let child = &tree[c];
                if child.complete {
                    continue;
                }
                let score = child.value(config.backup)
                    + config.exploration * (parent_visits.ln() / child.visits as f64).sqrt();
                if pick.is_none_or(|(s, _)| score > s) {
                    pick = Some((score, c));
                }
            }
            idx = pick.expect("incomplete node has an incomplete child").1;
        }

        // Expansion.
        if tree[idx].depth < horizon {
            let (acts, targets) = tree[idx].untried.pop_front().expect("checked above");
            let parent = &tree[idx];
            let mut actions = parent.actions.clone();
            let mut paths = parent.paths.clone();
            for j in 0..m {
                actions[j].push(acts[j]);
                paths[j].push(targets[j]);
            }
            let depth = parent.depth + 1;
            let untried = if depth < horizon { joint_children(map, &targets).into() } else { Default::default() };
            let child = tree.len();
            tree.push(TreeNode {
                depth,
                positions: targets,
                actions,
                paths,
                parent: Some(idx),
                children: Vec::new(),
                untried,
                visits: 0,
                total: 0.0,
                max: f64::NEG_INFINITY,
                complete: depth >= horizon,
                best: None,
            });
            if tree[idx].children.is_empty() && idx != 0 {
                stats.nodes_expanded += 1;
            }
            tree[idx].children.push(child);
            stats.nodes_generated += 1;
            idx = child;
        }

        // Rollout.
        let mut positions = tree[idx].positions.clone();
        let mut actions = tree[idx].actions.clone();
        let mut paths = tree[idx].paths.clone();
        for _ in tree[idx].depth..horizon {
            let options = joint_children(map, &positions);
            let (acts, targets) = options[rng.random_range(0..options.len())].clone();
            for j in 0..m {
                actions[j].push(acts[j]);
                paths[j].push(targets[j]);
            }
            positions = targets;
        }
        let value = g(&paths)?;
        max_leaf = max_leaf.max(value);

        // Backpropagation.
        let mut cur = Some(idx);
        while let Some(c) = cur {
            let node = &mut tree[c];
            node.visits += 1;
            node.total += value;
            node.max = node.max.max(value);
            if node.best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                node.best = Some((value, actions.clone(), paths.clone()));
            }
            cur = node.parent;
        }
        let mut cur = Some(idx);
        while let Some(c) = cur {
            let done = tree[c].depth >= horizon
                || (tree[c].untried.is_empty() && tree[c].children.iter().all(|&k| tree[k].complete));
            if !done {
                break;
            }
            tree[c].complete = true;
            cur = tree[c].parent;
        }
    }

    let chosen = tree[0]
        .children
        .iter()
        .copied()
        .filter(|&c| tree[c].visits > 0)
        .fold(None, |acc: Option<usize>, c| match acc {
            Some(b) if tree[b].value(config.backup) >= tree[c].value(config.backup) => Some(b),
            _ => Some(c),
        });
    let plan = match chosen.and_then(|c| tree[c].best.clone()) {
        Some((value, actions, paths)) => JointPlan { actions, paths, value },
        None => JointPlan { actions: vec![Vec::new(); m], paths: vec![Vec::new(); m], value: 0.0 },
    };
    let nodes = tree
        .iter()
        .filter(|n| n.visits > 0)
        .map(|n| NodeSummary { depth: n.depth, visits: n.visits, mean: n.total / n.visits as f64, max: n.max })
        .collect();
    Ok(MctsOutcome { outcome: SearchOutcome { plan, stats }, iterations_run, nodes, max_leaf })
}
