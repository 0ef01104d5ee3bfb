//! Receding-horizon planners over the joint action space of a bubble.
//!
//! [`multi_agent_search`] is a best-first tree search ordered by
//! `f = g + h`, where `g` is the expected gain of the observations committed
//! from the root to a node and `h` sums, per agent, the best gain that agent
//! could collect alone over the remaining steps given only the real history.
//! Children of a node are generated in descending order of their optimistic
//! bound and generation stops as soon as the bound cannot beat the incumbent.

mod joint;

pub use joint::{has_conflict, joint_children, JointAction};

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::grid::{Action, Cell, GridMap};
use crate::info_gain::{GainError, InfoGain};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub horizon: usize,
    /// Skip children whose optimistic bound is below the incumbent.
    pub pruning: bool,
    /// Condition each agent's continuation bound on the node's committed
    /// observations instead of the real history alone.
    pub tight_heuristic: bool,
}

impl SearchConfig {
    pub fn new(horizon: usize) -> Self {
        SearchConfig { horizon, pruning: true, tight_heuristic: false }
    }
}

/// Per-agent action sequences and the cells they visit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPlan {
    pub actions: Vec<Vec<Action>>,
    pub paths: Vec<Vec<Cell>>,
    pub value: f64,
}

impl JointPlan {
    pub fn num_agents(&self) -> usize {
        self.actions.len()
    }

    /// First action of every agent; Idle for empty plans.
    pub fn first_actions(&self) -> Vec<Action> {
        self.actions.iter().map(|a| a.first().copied().unwrap_or(Action::Idle)).collect()
    }

    /// True if the plan has a vertex or swap conflict at any step.
    pub fn has_conflict(&self, start: &[Cell]) -> bool {
        let steps = self.paths.iter().map(Vec::len).max().unwrap_or(0);
        let mut from = start.to_vec();
        for t in 0..steps {
            let to: Vec<Cell> = self.paths.iter().zip(&from).map(|(p, &f)| p.get(t).copied().unwrap_or(f)).collect();
            if has_conflict(&from, &to) {
                return true;
            }
            from = to;
        }
        false
    }
}

/// Node counts of one search. Neither count includes the root.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_generated: u64,
    pub nodes_expanded: u64,
    /// `b + b² + … + b^δ` with `b = 5^agents`.
    pub max_possible_nodes: u64,
}

impl SearchStats {
    pub fn accumulate(&mut self, other: SearchStats) {
        self.nodes_generated += other.nodes_generated;
        self.nodes_expanded += other.nodes_expanded;
        self.max_possible_nodes = self.max_possible_nodes.saturating_add(other.max_possible_nodes);
    }
}

pub fn max_possible_nodes(agents: usize, horizon: usize) -> u64 {
    let b = 5u64.saturating_pow(agents as u32);
    (1..=horizon as u32).fold(0u64, |acc, d| acc.saturating_add(b.saturating_pow(d)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub plan: JointPlan,
    pub stats: SearchStats,
}

/// Optimistic remaining gain at a node.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicValue {
    /// Sum over agents of the best single-agent continuation.
    pub h: f64,
    /// Per agent, best continuation starting with each action (canonical
    /// order); `None` where the action is not available.
    pub per_agent: Vec<[Option<f64>; 5]>,
}

impl HeuristicValue {
    /// Optimistic remaining gain if the node takes `joint` next.
    pub fn child_bound(&self, joint: &[Action]) -> f64 {
        joint
            .iter()
            .zip(&self.per_agent)
            .map(|(a, b)| b[a.index()].unwrap_or(f64::NEG_INFINITY))
            .sum()
    }

    fn zero(agents: usize) -> Self {
        HeuristicValue { h: 0.0, per_agent: vec![[None; 5]; agents] }
    }
}

/// Best single-agent gains by first action, memoized on `(cell, steps)`.
/// Valid for one root belief.
struct ContinuationTable {
    table: HashMap<(Cell, usize), [Option<f64>; 5]>,
}

impl ContinuationTable {
    fn new() -> Self {
        ContinuationTable { table: HashMap::new() }
    }

    fn get(
        &mut self,
        gain: &InfoGain,
        belief: &BeliefState,
        map: &GridMap,
        cell: Cell,
        steps: usize,
    ) -> Result<[Option<f64>; 5], GainError> {
        if let Some(v) = self.table.get(&(cell, steps)) {
            return Ok(*v);
        }
        let v = continuation_maxima(gain, belief, map, cell, steps, &[])?;
        self.table.insert((cell, steps), v);
        Ok(v)
    }
}

/// For each first action (Idle always included), the best gain over
/// `steps`-long sequences from `cell`, each scored together with `prefix`.
fn continuation_maxima(
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    cell: Cell,
    steps: usize,
    prefix: &[Cell],
) -> Result<[Option<f64>; 5], GainError> {
    let mut out = [None; 5];
    if steps == 0 {
        return Ok(out);
    }
    let mut firsts: Vec<Action> = map.feasible_actions(cell);
    if !firsts.contains(&Action::Idle) {
        firsts.push(Action::Idle);
    }
    let mut path = prefix.to_vec();
    for first in firsts {
        let next = map.step(cell, first).unwrap_or(cell);
        path.push(next);
        let mut best = f64::NEG_INFINITY;
        enumerate_paths(map, next, steps - 1, true, &mut path, &mut |p| {
            let v = gain.expected_gain_cells(belief, p)?;
            if v > best {
                best = v;
            }
            Ok(())
        })?;
        path.pop();
        out[first.index()] = Some(best);
    }
    Ok(out)
}

/// Visits every single-agent continuation of `steps` moves from `cell` in
/// canonical order, with the visited cells appended to `path`.
///
/// With `idle`, Idle is offered at every step: a joint expansion may force it
/// on an agent blocked by its teammates, so the relaxation must cover it.
fn enumerate_paths<F>(
    map: &GridMap,
    cell: Cell,
    steps: usize,
    idle: bool,
    path: &mut Vec<Cell>,
    visit: &mut F,
) -> Result<(), GainError>
where
    F: FnMut(&[Cell]) -> Result<(), GainError>,
{
    if steps == 0 {
        return visit(path);
    }
    let mut actions = map.feasible_actions(cell);
    if idle && !actions.contains(&Action::Idle) {
        actions.push(Action::Idle);
    }
    for action in actions {
        let next = map.step(cell, action).unwrap_or(cell);
        path.push(next);
        enumerate_paths(map, next, steps - 1, idle, path, visit)?;
        path.pop();
    }
    Ok(())
}

/// Decoupled heuristic at a node at `depth`, conditioned on `belief` only.
pub fn h_value(
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    positions: &[Cell],
    depth: usize,
    horizon: usize,
) -> Result<HeuristicValue, GainError> {
    let mut table = ContinuationTable::new();
    let children = joint_children(map, positions);
    history_heuristic(&mut table, gain, belief, map, positions, &children, depth, horizon)
}

#[allow(clippy::too_many_arguments)]
fn history_heuristic(
    table: &mut ContinuationTable,
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    positions: &[Cell],
    children: &[(JointAction, Vec<Cell>)],
    depth: usize,
    horizon: usize,
) -> Result<HeuristicValue, GainError> {
    if depth >= horizon {
        return Ok(HeuristicValue::zero(positions.len()));
    }
    let mut per_agent = Vec::with_capacity(positions.len());
    for &cell in positions {
        per_agent.push(table.get(gain, belief, map, cell, horizon - depth)?);
    }
    Ok(assemble(per_agent, children))
}

/// `h_j` is the best bound over actions agent `j` actually takes in some child.
fn assemble(per_agent: Vec<[Option<f64>; 5]>, children: &[(JointAction, Vec<Cell>)]) -> HeuristicValue {
    let h = (0..per_agent.len())
        .map(|j| {
            children
                .iter()
                .filter_map(|(acts, _)| per_agent[j][acts[j].index()])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>();
    HeuristicValue { h, per_agent }
}

struct Node {
    depth: usize,
    positions: Vec<Cell>,
    paths: Vec<Vec<Cell>>,
    actions: Vec<Vec<Action>>,
    g: f64,
    h: f64,
    /// Flattened joint action codes, depth-major; the tie-break key.
    key: Vec<u8>,
}

impl Node {
    fn f(&self) -> f64 {
        self.g + self.h
    }
}

struct Entry {
    f: f64,
    key: Vec<u8>,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Max-heap on f; ties go to the lexicographically smaller action sequence.
    fn cmp(&self, other: &Self) -> Ordering {
        self.f.total_cmp(&other.f).then_with(|| other.key.cmp(&self.key))
    }
}

struct Searcher<'a> {
    gain: &'a InfoGain,
    belief: &'a BeliefState,
    map: &'a GridMap,
    config: SearchConfig,
    table: ContinuationTable,
    g_cache: HashMap<Vec<Cell>, f64>,
}

impl Searcher<'_> {
    fn g(&mut self, paths: &[Vec<Cell>]) -> Result<f64, GainError> {
        let mut cells: Vec<Cell> = paths.iter().flatten().copied().collect();
        cells.sort_unstable();
        if let Some(&v) = self.g_cache.get(&cells) {
            return Ok(v);
        }
        let v = self.gain.expected_gain_cells(self.belief, &cells)?;
        self.g_cache.insert(cells, v);
        Ok(v)
    }

    fn heuristic(&mut self, node: &Node, children: &[(JointAction, Vec<Cell>)]) -> Result<HeuristicValue, GainError> {
        let horizon = self.config.horizon;
        if !self.config.tight_heuristic || node.depth == 0 {
            return history_heuristic(
                &mut self.table,
                self.gain,
                self.belief,
                self.map,
                &node.positions,
                children,
                node.depth,
                horizon,
            );
        }
        if node.depth >= horizon {
            return Ok(HeuristicValue::zero(node.positions.len()));
        }
        let committed: Vec<Cell> = node.paths.iter().flatten().copied().collect();
        let mut per_agent = Vec::with_capacity(node.positions.len());
        for &cell in &node.positions {
            let mut bounds =
                continuation_maxima(self.gain, self.belief, self.map, cell, horizon - node.depth, &committed)?;
            for b in bounds.iter_mut().flatten() {
                *b -= node.g;
            }
            per_agent.push(bounds);
        }
        Ok(assemble(per_agent, children))
    }

    fn leaf_plan(&mut self, root: &[Cell]) -> Result<JointPlan, GainError> {
        let m = root.len();
        let mut positions = root.to_vec();
        let mut paths = vec![Vec::new(); m];
        let mut actions = vec![Vec::new(); m];
        for _ in 0..self.config.horizon {
            let (acts, targets) = joint_children(self.map, &positions).swap_remove(0);
            for j in 0..m {
                actions[j].push(acts[j]);
                paths[j].push(targets[j]);
            }
            positions = targets;
        }
        let value = self.g(&paths)?;
        Ok(JointPlan { actions, paths, value })
    }
}

/// Optimal joint plan for a bubble under the additive information reward.
///
/// `belief` is the bubble's merged belief and `positions` the members'
/// current cells (distinct). The incumbent starts as the lexicographically
/// first legal plan, so a feasible plan is always returned.
pub fn multi_agent_search(
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    positions: &[Cell],
    config: SearchConfig,
) -> Result<SearchOutcome, GainError> {
    let m = positions.len();
    let mut stats = SearchStats { max_possible_nodes: max_possible_nodes(m, config.horizon), ..Default::default() };
    let mut s = Searcher { gain, belief, map, config, table: ContinuationTable::new(), g_cache: HashMap::new() };

    let mut best = s.leaf_plan(positions)?;
    if config.horizon == 0 || m == 0 {
        return Ok(SearchOutcome { plan: best, stats });
    }
    let mut incumbent = best.value;

    let mut root = Node {
        depth: 0,
        positions: positions.to_vec(),
        paths: vec![Vec::new(); m],
        actions: vec![Vec::new(); m],
        g: 0.0,
        h: 0.0,
        key: Vec::new(),
    };
    let root_children = joint_children(map, positions);
    root.h = s.heuristic(&root, &root_children)?.h;

    let mut arena = vec![root];
    let mut open = BinaryHeap::new();
    open.push(Entry { f: arena[0].f(), key: Vec::new(), idx: 0 });

    while let Some(Entry { idx, .. }) = open.pop() {
        let f = arena[idx].f();
        if f <= incumbent {
            break;
        }
        if idx != 0 {
            stats.nodes_expanded += 1;
        }
        if arena[idx].depth >= config.horizon {
            incumbent = f;
            let node = &arena[idx];
            best = JointPlan { actions: node.actions.clone(), paths: node.paths.clone(), value: node.g };
            continue;
        }

        let children = joint_children(map, &arena[idx].positions);
        let hv = s.heuristic(&arena[idx], &children)?;
        let mut ordered: Vec<(f64, JointAction, Vec<Cell>)> =
            children.into_iter().map(|(acts, to)| (hv.child_bound(&acts), acts, to)).collect();
        ordered.sort_by(|a, b| b.0.total_cmp(&a.0));

        let parent_g = arena[idx].g;
        for (bound, acts, targets) in ordered {
            if config.pruning && incumbent >= parent_g + bound {
                break;
            }
            let parent = &arena[idx];
            let mut paths = parent.paths.clone();
            let mut actions = parent.actions.clone();
            let mut key = parent.key.clone();
            for j in 0..m {
                paths[j].push(targets[j]);
                actions[j].push(acts[j]);
                key.push(acts[j].index() as u8);
            }
            let mut child = Node { depth: parent.depth + 1, positions: targets, paths, actions, g: 0.0, h: 0.0, key };
            child.g = s.g(&child.paths)?;
            if child.depth < config.horizon {
                let grandchildren = joint_children(map, &child.positions);
                child.h = s.heuristic(&child, &grandchildren)?.h;
            }
            stats.nodes_generated += 1;
            let entry = Entry { f: child.f(), key: child.key.clone(), idx: arena.len() };
            arena.push(child);
            open.push(entry);
        }
    }
    Ok(SearchOutcome { plan: best, stats })
}

/// Exhaustive single-agent search: the best `horizon`-step sequence from
/// `position`, first in canonical order among equals.
pub fn single_agent_forward_search(
    gain: &InfoGain,
    belief: &BeliefState,
    map: &GridMap,
    position: Cell,
    horizon: usize,
) -> Result<JointPlan, GainError> {
    let mut best: Option<(f64, Vec<Cell>)> = None;
    let mut path = Vec::with_capacity(horizon);
    enumerate_paths(map, position, horizon, false, &mut path, &mut |p| {
        let v = gain.expected_gain_cells(belief, p)?;
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, p.to_vec()));
        }
        Ok(())
    })?;
    let (value, cells) = best.expect("at least one sequence exists");
    let mut actions = Vec::with_capacity(horizon);
    let mut from = position;
    for &to in &cells {
        let action = Action::ALL.into_iter().find(|&a| map.step(from, a).unwrap_or(from) == to && map.feasible_actions(from).contains(&a));
        actions.push(action.expect("path follows feasible actions"));
        from = to;
    }
    Ok(JointPlan { actions: vec![actions], paths: vec![cells], value })
}

#[cfg(test)]
mod tests;
