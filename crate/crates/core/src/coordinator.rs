//! The distributed mission loop.
//!
//! Each step: agents within communication range form bubbles, bubble members
//! pool their histories, every bubble plans jointly and every other agent
//! plans alone, all first actions execute at once, and each agent takes one
//! measurement at its new cell. Knowledge is exchanged only inside a bubble at
//! the moment it exists; nothing is relayed afterwards.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefError, BeliefState, Observation};
use crate::grid::{Action, AgentId, AgentPose, Cell, GridMap, Step};
use crate::info_gain::{GainError, InfoGain};
use crate::mcts::{mcts_search, MctsConfig};
use crate::search::{
    has_conflict, multi_agent_search, single_agent_forward_search, JointPlan, SearchConfig, SearchStats,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinatorError {
    #[error("observation ({agent}, {time}) has conflicting values across agents")]
    Integrity { agent: AgentId, time: Step },
    #[error("planning failed for agents {agents:?}: {source}")]
    Planning { agents: Vec<AgentId>, source: GainError },
    #[error("joint plan for agents {0:?} contains a conflict")]
    PlanConflict(Vec<AgentId>),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("agent {agent} cannot take {action:?} from {cell}")]
    InfeasibleAction { agent: AgentId, cell: Cell, action: Action },
    #[error("expected {expected} scripted actions, got {found}")]
    ScriptLength { expected: usize, found: usize },
    #[error("start cell {0} is blocked or off the map")]
    BadStart(Cell),
    #[error("agents {0} and {1} share a start cell")]
    SharedStart(AgentId, AgentId),
}

/// Disjoint-set forest over agent ids.
#[derive(Clone, Debug)]
struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected component of the proximity graph with at least two members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bubble {
    /// Ascending.
    pub members: Vec<AgentId>,
    /// Lowest member id.
    pub lead: AgentId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    /// Ordered by lead.
    pub bubbles: Vec<Bubble>,
    /// Ascending.
    pub solos: Vec<AgentId>,
}

impl Partition {
    /// Bubble containing `agent`, if any.
    pub fn bubble_of(&self, agent: AgentId) -> Option<&Bubble> {
        self.bubbles.iter().find(|b| b.members.contains(&agent))
    }
}

/// Groups agents whose Manhattan distance is at most `range`, closed
/// transitively. `poses[k].agent` must equal `k`.
pub fn form_bubbles(map: &GridMap, poses: &[AgentPose], range: usize) -> Partition {
    let n = poses.len();
    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in a + 1..n {
            if map.manhattan(poses[a].cell, poses[b].cell) <= range {
                uf.union(a, b);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<AgentId>> = BTreeMap::new();
    for a in 0..n {
        let root = uf.find(a);
        groups.entry(root).or_default().push(a);
    }
    let mut part = Partition::default();
    for members in groups.into_values() {
        if members.len() >= 2 {
            part.bubbles.push(Bubble { lead: members[0], members });
        } else {
            part.solos.push(members[0]);
        }
    }
    part.bubbles.sort_by_key(|b| b.lead);
    part.solos.sort_unstable();
    part
}

/// One agent's private state.
#[derive(Clone, Debug)]
pub struct AgentRuntime {
    pub id: AgentId,
    pub pose: AgentPose,
    belief: BeliefState,
    known: BTreeSet<(AgentId, Step)>,
}

impl AgentRuntime {
    pub fn new(id: AgentId, cell: Cell, prior: BeliefState) -> Self {
        AgentRuntime { id, pose: AgentPose { agent: id, cell, time: 0 }, belief: prior, known: BTreeSet::new() }
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn known_observations(&self) -> &BTreeSet<(AgentId, Step)> {
        &self.known
    }

    fn observe(&mut self, obs: Observation) -> Result<(), BeliefError> {
        self.belief.observe(obs)?;
        self.known.insert(obs.identity());
        Ok(())
    }
}

/// Pools the histories of `members` into one belief, conditioned from
/// `prior` in `(time, agent)` order, and hands it to every member.
///
/// Histories are always kept in that order, so when one member already knows
/// the whole union its belief is reused as is.
pub fn merge_histories(
    agents: &mut [AgentRuntime],
    members: &[AgentId],
    prior: &BeliefState,
) -> Result<BeliefState, CoordinatorError> {
    let mut union: BTreeMap<(Step, AgentId), Observation> = BTreeMap::new();
    for &m in members {
        for obs in agents[m].belief.history() {
            let key = (obs.time, obs.agent);
            match union.get(&key) {
                Some(prev) if prev.cell != obs.cell || prev.value.to_bits() != obs.value.to_bits() => {
                    return Err(CoordinatorError::Integrity { agent: obs.agent, time: obs.time });
                }
                Some(_) => {}
                None => {
                    union.insert(key, *obs);
                }
            }
        }
    }
    let merged = match members.iter().find(|&&m| agents[m].belief.history().len() == union.len()) {
        Some(&m) => agents[m].belief.clone(),
        None => {
            let obs: Vec<Observation> = union.into_values().collect();
            prior.condition(&obs)?
        }
    };
    let known: BTreeSet<(AgentId, Step)> = merged.history().iter().map(Observation::identity).collect();
    for &m in members {
        agents[m].belief = merged.clone();
        agents[m].known = known.clone();
    }
    Ok(merged)
}

/// Source of measurements.
pub trait World {
    /// Noisy feature value observed by `agent` at `cell` at `time`.
    fn measure(&mut self, agent: AgentId, cell: Cell, time: Step) -> f64;
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum JointPlanner {
    AStar(SearchConfig),
    Mcts(MctsConfig),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollisionPolicy {
    /// Uncoordinated conflicts are resolved by idling one of the agents.
    ReactiveYield,
    /// Moves execute as planned; overlaps are counted.
    Ignore,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionPolicy {
    /// `None`: every agent plans alone on its own history and nothing is shared.
    pub joint: Option<JointPlanner>,
    pub collisions: CollisionPolicy,
    pub comm_range: usize,
    pub horizon: usize,
}

/// What happened in one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// Time after the step.
    pub time: Step,
    pub partition: Partition,
    pub planned: Vec<Action>,
    pub executed: Vec<Action>,
    pub positions: Vec<Cell>,
    pub reactive_yields: u64,
    /// Vertex and swap conflicts among executed moves.
    pub collision_events: u64,
    /// Joint-planner counts for this step, summed over bubbles.
    pub bubble_stats: SearchStats,
    pub observations: Vec<Observation>,
}

/// Replaces moves by Idle until no vertex or swap conflict remains.
/// Between a mover and a stayer the mover yields; between two movers the
/// higher id yields. Returns the number of substitutions.
pub fn resolve_yields(map: &GridMap, current: &[Cell], actions: &mut [Action]) -> u64 {
    let mut yields = 0;
    loop {
        let targets: Vec<Cell> = (0..current.len()).map(|a| target(map, current[a], actions[a])).collect();
        let mut loser = None;
        'scan: for a in 0..current.len() {
            for b in a + 1..current.len() {
                let vertex = targets[a] == targets[b];
                let swap = targets[a] == current[b] && targets[b] == current[a];
                if !(vertex || swap) {
                    continue;
                }
                let a_stays = targets[a] == current[a];
                let b_stays = targets[b] == current[b];
                loser = Some(match (a_stays, b_stays) {
                    (true, false) => b,
                    (false, true) => a,
                    _ => b,
                });
                break 'scan;
            }
        }
        match loser {
            Some(l) if actions[l] != Action::Idle => {
                actions[l] = Action::Idle;
                yields += 1;
            }
            // Both idle and still conflicting: agents share a cell already.
            _ => return yields,
        }
    }
}

fn target(map: &GridMap, cell: Cell, action: Action) -> Cell {
    map.step(cell, action).unwrap_or(cell)
}

/// Counts conflicting agent pairs for a simultaneous move.
pub fn count_collisions(from: &[Cell], to: &[Cell]) -> u64 {
    let mut n = 0;
    for a in 0..to.len() {
        for b in a + 1..to.len() {
            if to[a] == to[b] || (to[a] == from[b] && to[b] == from[a]) {
                n += 1;
            }
        }
    }
    n
}

/// Mission state across steps.
pub struct Mission {
    map: GridMap,
    gain: InfoGain,
    policy: MissionPolicy,
    prior: BeliefState,
    agents: Vec<AgentRuntime>,
    time: Step,
    mcts_rng: ChaCha8Rng,
}

impl Mission {
    /// `starts` must be passable. They must be distinct unless agents never
    /// share knowledge and ignore collisions.
    pub fn new(
        map: GridMap,
        gain: InfoGain,
        policy: MissionPolicy,
        prior: BeliefState,
        starts: &[Cell],
        mcts_rng: ChaCha8Rng,
    ) -> Result<Self, CoordinatorError> {
        for &c in starts {
            if !map.is_passable(c) {
                return Err(CoordinatorError::BadStart(c));
            }
        }
        let colocation_ok = policy.joint.is_none() && policy.collisions == CollisionPolicy::Ignore;
        if !colocation_ok {
            for a in 0..starts.len() {
                for b in a + 1..starts.len() {
                    if starts[a] == starts[b] {
                        return Err(CoordinatorError::SharedStart(a, b));
                    }
                }
            }
        }
        let agents = starts.iter().enumerate().map(|(i, &c)| AgentRuntime::new(i, c, prior.to_prior())).collect();
        Ok(Mission { map, gain, policy, prior: prior.to_prior(), agents, time: 0, mcts_rng })
    }

    /// Convenience constructor with the MCTS stream seeded from `seed`.
    pub fn with_seed(
        map: GridMap,
        gain: InfoGain,
        policy: MissionPolicy,
        prior: BeliefState,
        starts: &[Cell],
        seed: u64,
    ) -> Result<Self, CoordinatorError> {
        Self::new(map, gain, policy, prior, starts, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn agents(&self) -> &[AgentRuntime] {
        &self.agents
    }

    pub fn time(&self) -> Step {
        self.time
    }

    pub fn positions(&self) -> Vec<Cell> {
        self.agents.iter().map(|a| a.pose.cell).collect()
    }

    fn poses(&self) -> Vec<AgentPose> {
        self.agents.iter().map(|a| a.pose).collect()
    }

    /// Forms bubbles and pools their histories. Without sharing every agent
    /// is solo.
    fn exchange(&mut self) -> Result<Partition, CoordinatorError> {
        if self.policy.joint.is_none() {
            return Ok(Partition { bubbles: Vec::new(), solos: (0..self.agents.len()).collect() });
        }
        let part = form_bubbles(&self.map, &self.poses(), self.policy.comm_range);
        for bubble in &part.bubbles {
            merge_histories(&mut self.agents, &bubble.members, &self.prior)?;
        }
        Ok(part)
    }

    fn plan(&mut self, part: &Partition) -> Result<(Vec<Action>, SearchStats), CoordinatorError> {
        let mut actions = vec![Action::Idle; self.agents.len()];
        let mut stats = SearchStats::default();
        for bubble in &part.bubbles {
            let belief = &self.agents[bubble.lead].belief;
            let positions: Vec<Cell> = bubble.members.iter().map(|&m| self.agents[m].pose.cell).collect();
            let attribute = |source| CoordinatorError::Planning { agents: bubble.members.clone(), source };
            let outcome = match self.policy.joint.expect("bubbles only form with a joint planner") {
                JointPlanner::AStar(config) => {
                    let config = SearchConfig { horizon: self.policy.horizon, ..config };
                    multi_agent_search(&self.gain, belief, &self.map, &positions, config).map_err(attribute)?
                }
                JointPlanner::Mcts(config) => {
                    mcts_search(&self.gain, belief, &self.map, &positions, self.policy.horizon, &config, &mut self.mcts_rng)
                        .map_err(attribute)?
                        .outcome
                }
            };
            if outcome.plan.has_conflict(&positions) {
                return Err(CoordinatorError::PlanConflict(bubble.members.clone()));
            }
            stats.accumulate(outcome.stats);
            for (k, &m) in bubble.members.iter().enumerate() {
                actions[m] = outcome.plan.first_actions()[k];
            }
        }
        for &a in &part.solos {
            let agent = &self.agents[a];
            let plan: JointPlan =
                single_agent_forward_search(&self.gain, &agent.belief, &self.map, agent.pose.cell, self.policy.horizon)
                    .map_err(|source| CoordinatorError::Planning { agents: vec![a], source })?;
            actions[a] = plan.first_actions()[0];
        }
        Ok((actions, stats))
    }

    /// One receding-horizon step: exchange, plan, execute first actions,
    /// observe.
    pub fn step<W: World>(&mut self, world: &mut W) -> Result<StepReport, CoordinatorError> {
        let part = self.exchange()?;
        let (planned, stats) = self.plan(&part)?;
        self.execute(world, part, planned, stats)
    }

    /// Like [`Mission::step`] but executes `actions` instead of planning.
    pub fn step_scripted<W: World>(&mut self, world: &mut W, actions: &[Action]) -> Result<StepReport, CoordinatorError> {
        if actions.len() != self.agents.len() {
            return Err(CoordinatorError::ScriptLength { expected: self.agents.len(), found: actions.len() });
        }
        let part = self.exchange()?;
        self.execute(world, part, actions.to_vec(), SearchStats::default())
    }

    fn execute<W: World>(
        &mut self,
        world: &mut W,
        partition: Partition,
        planned: Vec<Action>,
        bubble_stats: SearchStats,
    ) -> Result<StepReport, CoordinatorError> {
        let from = self.positions();
        for (a, &action) in planned.iter().enumerate() {
            if action != Action::Idle && self.map.step(from[a], action).is_none() {
                return Err(CoordinatorError::InfeasibleAction { agent: a, cell: from[a], action });
            }
        }
        let mut executed = planned.clone();
        let reactive_yields = match self.policy.collisions {
            CollisionPolicy::ReactiveYield => resolve_yields(&self.map, &from, &mut executed),
            CollisionPolicy::Ignore => 0,
        };
        let to: Vec<Cell> = (0..from.len()).map(|a| target(&self.map, from[a], executed[a])).collect();
        let collision_events = count_collisions(&from, &to);
        debug_assert!(self.policy.collisions == CollisionPolicy::Ignore || !has_conflict(&from, &to));

        self.time += 1;
        let mut observations = Vec::with_capacity(to.len());
        for (a, agent) in self.agents.iter_mut().enumerate() {
            agent.pose = AgentPose { agent: a, cell: to[a], time: self.time };
            let value = world.measure(a, to[a], self.time);
            let obs = Observation { agent: a, time: self.time, cell: to[a], value };
            agent.observe(obs)?;
            observations.push(obs);
        }
        Ok(StepReport {
            time: self.time,
            partition,
            planned,
            executed,
            positions: to,
            reactive_yields,
            collision_events,
            bubble_stats,
            observations,
        })
    }
}
