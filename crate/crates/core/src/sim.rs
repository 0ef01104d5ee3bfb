//! Ground truth, measurements, discovery bookkeeping and whole-mission runs
//! for the joint planner and its baselines.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{BeliefError, BeliefState, GpHyperparams, PhenomenonParams};
use crate::config::{Algorithm, ConfigError, DiscoveryRule, FieldKind, ScenarioConfig};
use crate::coordinator::{
    CollisionPolicy, CoordinatorError, JointPlanner, Mission, MissionPolicy, StepReport, World,
};
use crate::grid::{AgentId, Cell, GridMap, Step};
use crate::info_gain::{cholesky_lower, GainError, InfoGain};
use crate::search::SearchConfig;

/// Height of every ground-truth bump above the mean.
pub const BUMP_AMPLITUDE: f64 = 1.0;

/// Minimum bump length scale, in cells.
pub const MIN_BUMP_SCALE: f64 = 1.5;

/// Named sub-streams of the master seed.
pub mod streams {
    pub const FIELD: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const STARTS: u64 = 3;
    pub const MCTS: u64 = 4;
}

/// Independent generator for sub-stream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{requested} phenomena requested but the map has {available} passable cells")]
    TooManyPhenomena { requested: usize, available: usize },
    #[error("{requested} agents requested but the map has {available} passable cells")]
    TooManyAgents { requested: usize, available: usize },
    #[error("bump peak {peak} does not exceed the phenomenon threshold {threshold}")]
    BumpBelowThreshold { peak: f64, threshold: f64 },
    #[error("GP prior covariance is not positive definite")]
    SingularPrior,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Coordinator(#[from] CoordinatorError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Gain(#[from] GainError),
}

/// True feature values and target locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthField {
    /// Indexed by cell; blocked cells hold the mean.
    pub values: Vec<f64>,
    /// Ascending.
    pub phenomena: Vec<Cell>,
    pub rng_seed: u64,
}

impl GroundTruthField {
    pub fn value(&self, cell: Cell) -> f64 {
        self.values[cell.0]
    }

    /// Index of the phenomenon at `cell`.
    pub fn phenomenon_at(&self, cell: Cell) -> Option<usize> {
        self.phenomena.binary_search(&cell).ok()
    }
}

/// Flat field at `gp.mean` plus one bump `A exp(-d²/ℓ²)` per phenomenon,
/// `ℓ = max(θ2, 1.5)`, on `n` distinct passable cells.
pub fn build_field(
    map: &GridMap,
    n: usize,
    gp: &GpHyperparams,
    ph: &PhenomenonParams,
    seed: u64,
) -> Result<GroundTruthField, SimError> {
    let passable: Vec<Cell> = map.passable_cells().collect();
    if n > passable.len() {
        return Err(SimError::TooManyPhenomena { requested: n, available: passable.len() });
    }
    let peak = gp.mean + BUMP_AMPLITUDE;
    if peak <= ph.u_tilde {
        return Err(SimError::BumpBelowThreshold { peak, threshold: ph.u_tilde });
    }
    let mut rng = substream(seed, streams::FIELD);
    let mut phenomena: Vec<Cell> = sample(&mut rng, passable.len(), n).into_iter().map(|i| passable[i]).collect();
    phenomena.sort_unstable();
    let scale2 = gp.theta2.max(MIN_BUMP_SCALE).powi(2);
    let values = (0..map.num_cells())
        .map(|c| {
            let cell = Cell(c);
            if !map.is_passable(cell) {
                return gp.mean;
            }
            gp.mean
                + phenomena
                    .iter()
                    .map(|&p| BUMP_AMPLITUDE * (-map.squared_distance(cell, p) / scale2).exp())
                    .sum::<f64>()
        })
        .collect();
    Ok(GroundTruthField { values, phenomena, rng_seed: seed })
}

/// Field drawn from the GP prior over passable cells; up to `n` phenomena
/// are placed uniformly among cells whose value exceeds the threshold.
/// Dense factorization, so intended for small maps.
pub fn build_gp_field(
    map: &GridMap,
    n: usize,
    gp: &GpHyperparams,
    ph: &PhenomenonParams,
    seed: u64,
) -> Result<GroundTruthField, SimError> {
    let passable: Vec<Cell> = map.passable_cells().collect();
    if n > passable.len() {
        return Err(SimError::TooManyPhenomena { requested: n, available: passable.len() });
    }
    let k = passable.len();
    let mut cov = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            cov[a * k + b] = gp.kernel(map.squared_distance(passable[a], passable[b]));
        }
        cov[a * k + a] += 1e-9;
    }
    let l = cholesky_lower(&cov, k).ok_or(SimError::SingularPrior)?;
    let mut rng = substream(seed, streams::FIELD);
    let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let mut values = vec![gp.mean; map.num_cells()];
    for a in 0..k {
        values[passable[a].0] = gp.mean + (0..=a).map(|b| l[a * k + b] * z[b]).sum::<f64>();
    }
    let hot: Vec<Cell> = passable.iter().copied().filter(|c| values[c.0] > ph.u_tilde).collect();
    let take = n.min(hot.len());
    let mut phenomena: Vec<Cell> = sample(&mut rng, hot.len(), take).into_iter().map(|i| hot[i]).collect();
    phenomena.sort_unstable();
    Ok(GroundTruthField { values, phenomena, rng_seed: seed })
}

/// Field value plus `N(0, σ²)` noise.
pub fn sample_measurement<R: Rng>(field: &GroundTruthField, cell: Cell, sigma: f64, rng: &mut R) -> f64 {
    if sigma == 0.0 {
        return field.value(cell);
    }
    let noise = Normal::new(0.0, sigma).expect("sigma validated finite and non-negative");
    field.value(cell) + noise.sample(rng)
}

/// Ground truth plus the mission's noise stream.
pub struct SimWorld {
    pub field: GroundTruthField,
    pub sigma: f64,
    rng: ChaCha8Rng,
}

impl SimWorld {
    pub fn new(field: GroundTruthField, sigma: f64, rng: ChaCha8Rng) -> Self {
        SimWorld { field, sigma, rng }
    }
}

impl World for SimWorld {
    fn measure(&mut self, _agent: AgentId, cell: Cell, _time: Step) -> f64 {
        sample_measurement(&self.field, cell, self.sigma, &mut self.rng)
    }
}

/// Global discovery state of a mission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryTracker {
    /// Per phenomenon, the step it was first located.
    pub found_at: Vec<Option<Step>>,
    pub unique: usize,
    pub first_unique: Vec<Option<Step>>,
}

impl DiscoveryTracker {
    pub fn new(num_phenomena: usize, num_agents: usize) -> Self {
        DiscoveryTracker { found_at: vec![None; num_phenomena], unique: 0, first_unique: vec![None; num_agents] }
    }
}

/// Credits `agent` at `cell` on `step`. Returns true on a new unique find.
pub fn record_discovery(
    field: &GroundTruthField,
    agent: AgentId,
    cell: Cell,
    step: Step,
    tracker: &mut DiscoveryTracker,
) -> bool {
    let Some(k) = field.phenomenon_at(cell) else {
        return false;
    };
    if tracker.found_at[k].is_some() {
        return false;
    }
    tracker.found_at[k] = Some(step);
    tracker.unique += 1;
    tracker.first_unique[agent].get_or_insert(step);
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub unique_phenomena_discovered: usize,
    /// Per agent; `None` if the agent never made a unique find.
    pub steps_to_first_unique: Vec<Option<Step>>,
    pub nodes_generated: u64,
    pub nodes_expanded: u64,
    pub max_possible_nodes: u64,
    pub reactive_yields: u64,
    pub wall_time: f64,
    pub collision_events: u64,
}

impl MissionMetrics {
    /// Copy with the only non-deterministic field zeroed.
    pub fn without_wall_time(&self) -> Self {
        MissionMetrics { wall_time: 0.0, ..self.clone() }
    }
}

#[derive(Clone, Debug)]
pub struct MissionOutcome {
    pub metrics: MissionMetrics,
    pub field: GroundTruthField,
    pub starts: Vec<Cell>,
    pub steps: Vec<StepReport>,
    /// Per agent, the cell occupied at times `1..=H`.
    pub trajectories: Vec<Vec<Cell>>,
    pub discoveries: DiscoveryTracker,
}

/// Coordination and collision handling used by each algorithm.
pub fn mission_policy(config: &ScenarioConfig) -> MissionPolicy {
    let search = SearchConfig {
        horizon: config.horizon,
        pruning: config.search.pruning,
        tight_heuristic: config.search.tight_heuristic,
    };
    let (joint, collisions) = match config.algorithm {
        Algorithm::MaV => (Some(JointPlanner::AStar(search)), CollisionPolicy::ReactiveYield),
        Algorithm::MaMctsV => (Some(JointPlanner::Mcts(config.mcts)), CollisionPolicy::ReactiveYield),
        Algorithm::SaV => (None, CollisionPolicy::Ignore),
        Algorithm::SaVCa => (None, CollisionPolicy::ReactiveYield),
    };
    MissionPolicy { joint, collisions, comm_range: config.comm_range, horizon: config.horizon }
}

/// Configured starts, or distinct uniformly drawn passable cells.
pub fn start_cells(config: &ScenarioConfig, map: &GridMap) -> Result<Vec<Cell>, SimError> {
    if let Some(starts) = &config.starts {
        return starts
            .iter()
            .map(|&[row, col]| {
                map.cell_at(row, col)
                    .filter(|&c| map.is_passable(c))
                    .ok_or_else(|| ConfigError::invalid("starts", format!("({row}, {col}) is not a passable cell")).into())
            })
            .collect();
    }
    let passable: Vec<Cell> = map.passable_cells().collect();
    if config.num_agents > passable.len() {
        return Err(SimError::TooManyAgents { requested: config.num_agents, available: passable.len() });
    }
    let mut rng = substream(config.seed, streams::STARTS);
    Ok(sample(&mut rng, passable.len(), config.num_agents).into_iter().map(|i| passable[i]).collect())
}

/// Runs one mission of `config.duration` steps on `map`.
pub fn run_mission(config: &ScenarioConfig, map: &GridMap) -> Result<MissionOutcome, SimError> {
    config.validate()?;
    let field = match config.field {
        FieldKind::Bumps => build_field(map, config.num_phenomena, &config.gp, &config.phenomenon, config.seed)?,
        FieldKind::GpPrior => build_gp_field(map, config.num_phenomena, &config.gp, &config.phenomenon, config.seed)?,
    };
    let starts = start_cells(config, map)?;
    let gain = InfoGain::new(config.gain)?;
    let prior = BeliefState::prior(map, config.gp, config.phenomenon)?;
    let mut mission = Mission::new(
        map.clone(),
        gain,
        mission_policy(config),
        prior,
        &starts,
        substream(config.seed, streams::MCTS),
    )?;
    let mut world = SimWorld::new(field, config.gp.sigma, substream(config.seed, streams::NOISE));
    let mut tracker = DiscoveryTracker::new(world.field.phenomena.len(), starts.len());
    let mut metrics = MissionMetrics::default();
    let mut steps = Vec::with_capacity(config.duration as usize);
    let mut trajectories = vec![Vec::with_capacity(config.duration as usize); starts.len()];

    let clock = Instant::now();
    for _ in 0..config.duration {
        let report = mission.step(&mut world)?;
        for (a, &cell) in report.positions.iter().enumerate() {
            trajectories[a].push(cell);
            let believed = match config.discovery {
                DiscoveryRule::Visit => true,
                DiscoveryRule::Belief { threshold } => mission.agents()[a].belief().phenomenon_prob(cell)? >= threshold,
            };
            if believed {
                record_discovery(&world.field, a, cell, report.time, &mut tracker);
            }
        }
        metrics.nodes_generated += report.bubble_stats.nodes_generated;
        metrics.nodes_expanded += report.bubble_stats.nodes_expanded;
        metrics.max_possible_nodes = metrics.max_possible_nodes.saturating_add(report.bubble_stats.max_possible_nodes);
        metrics.reactive_yields += report.reactive_yields;
        metrics.collision_events += report.collision_events;
        steps.push(report);
    }
    metrics.wall_time = clock.elapsed().as_secs_f64();
    metrics.unique_phenomena_discovered = tracker.unique;
    metrics.steps_to_first_unique = tracker.first_unique.clone();
    Ok(MissionOutcome { metrics, field: world.field, starts, steps, trajectories, discoveries: tracker })
}

fn run_as(config: &ScenarioConfig, map: &GridMap, algorithm: Algorithm) -> Result<MissionOutcome, SimError> {
    run_mission(&ScenarioConfig { algorithm, ..config.clone() }, map)
}

/// Independent agents, no sharing, no collision handling.
pub fn run_baseline_sav(config: &ScenarioConfig, map: &GridMap) -> Result<MissionOutcome, SimError> {
    run_as(config, map, Algorithm::SaV)
}

/// Independent agents with reactive yielding.
pub fn run_baseline_savca(config: &ScenarioConfig, map: &GridMap) -> Result<MissionOutcome, SimError> {
    run_as(config, map, Algorithm::SaVCa)
}

/// Bubbles plan with UCT instead of A*.
pub fn run_baseline_mcts(config: &ScenarioConfig, map: &GridMap) -> Result<MissionOutcome, SimError> {
    run_as(config, map, Algorithm::MaMctsV)
}

/// Means over a set of missions run with one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub mean_unique: f64,
    /// Per agent; an agent that never made a unique find counts as the full
    /// mission duration.
    pub mean_steps_to_first: f64,
    /// Per agent, over only the agents that made a unique find.
    pub mean_steps_to_first_finders: Option<f64>,
    pub agents_without_find: usize,
    pub mean_collision_events: f64,
    pub mean_reactive_yields: f64,
}

/// One mission's contribution to a summary.
#[derive(Copy, Clone, Debug)]
pub struct SummaryInput<'a> {
    pub algorithm: Algorithm,
    pub duration: Step,
    pub metrics: &'a MissionMetrics,
}

/// One summary per algorithm present in `runs`, in [`Algorithm::ALL`] order.
pub fn summarize<'a, I>(runs: I) -> Vec<AlgorithmSummary>
where
    I: IntoIterator<Item = SummaryInput<'a>>,
{
    let mut by_alg: Vec<(Algorithm, Vec<SummaryInput<'a>>)> = Algorithm::ALL.iter().map(|&a| (a, Vec::new())).collect();
    for run in runs {
        by_alg.iter_mut().find(|(a, _)| *a == run.algorithm).expect("known algorithm").1.push(run);
    }
    by_alg
        .into_iter()
        .filter(|(_, rs)| !rs.is_empty())
        .map(|(algorithm, rs)| {
            let n = rs.len() as f64;
            let mean = |f: &dyn Fn(&MissionMetrics) -> f64| rs.iter().map(|r| f(r.metrics)).sum::<f64>() / n;
            let censored: Vec<f64> = rs
                .iter()
                .flat_map(|r| r.metrics.steps_to_first_unique.iter().map(|s| f64::from(s.unwrap_or(r.duration))))
                .collect();
            let finders: Vec<f64> =
                rs.iter().flat_map(|r| r.metrics.steps_to_first_unique.iter().flatten().map(|&s| f64::from(s))).collect();
            AlgorithmSummary {
                algorithm,
                runs: rs.len(),
                mean_unique: mean(&|m| m.unique_phenomena_discovered as f64),
                mean_steps_to_first: censored.iter().sum::<f64>() / censored.len().max(1) as f64,
                mean_steps_to_first_finders: (!finders.is_empty())
                    .then(|| finders.iter().sum::<f64>() / finders.len() as f64),
                agents_without_find: censored.len() - finders.len(),
                mean_collision_events: mean(&|m| m.collision_events as f64),
                mean_reactive_yields: mean(&|m| m.reactive_yields as f64),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MapSource;

    fn scenario(algorithm: Algorithm, agents: usize, n: usize, h: u32, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            map: MapSource::Empty { width: 16, height: 16 },
            num_agents: agents,
            num_phenomena: n,
            duration: h,
            algorithm,
            seed,
            ..ScenarioConfig::default()
        }
    }

    fn empty16() -> GridMap {
        GridMap::empty(16, 16, "empty-16-16").unwrap()
    }

    #[test]
    fn flat_field_without_phenomena() {
        let f = build_field(&empty16(), 0, &GpHyperparams::default(), &PhenomenonParams::default(), 1).unwrap();
        assert!(f.phenomena.is_empty());
        assert!(f.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_bump_peak() {
        let f = build_field(&empty16(), 1, &GpHyperparams::default(), &PhenomenonParams::default(), 4).unwrap();
        assert_eq!(f.phenomena.len(), 1);
        let above = f.values.iter().filter(|&&v| v >= 2.0).count();
        assert_eq!(above, 1);
        assert_eq!(f.value(f.phenomena[0]), 2.0);
    }

    #[test]
    fn field_is_seed_deterministic_and_checked() {
        let (gp, ph) = (GpHyperparams::default(), PhenomenonParams::default());
        let map = empty16();
        assert_eq!(build_field(&map, 5, &gp, &ph, 9).unwrap(), build_field(&map, 5, &gp, &ph, 9).unwrap());
        assert_ne!(build_field(&map, 5, &gp, &ph, 9).unwrap(), build_field(&map, 5, &gp, &ph, 10).unwrap());
        assert!(matches!(build_field(&map, 257, &gp, &ph, 0), Err(SimError::TooManyPhenomena { .. })));
        let low = GpHyperparams { mean: 0.3, ..gp };
        assert!(matches!(build_field(&map, 1, &low, &ph, 0), Err(SimError::BumpBelowThreshold { .. })));
        let blocked = GridMap::parse("type octile\nheight 1\nwidth 3\nmap\n.@.\n", "b").unwrap();
        let f = build_field(&blocked, 2, &gp, &ph, 0).unwrap();
        assert_eq!(f.phenomena, vec![Cell(0), Cell(2)]);
    }

    #[test]
    fn gp_field_plants_only_hot_cells() {
        let gp = GpHyperparams { theta2: 2.0, ..GpHyperparams::default() };
        let ph = PhenomenonParams::default();
        let map = GridMap::empty(8, 8, "e").unwrap();
        let f = build_gp_field(&map, 4, &gp, &ph, 2).unwrap();
        assert!(f.phenomena.len() <= 4);
        assert!(f.phenomena.iter().all(|&c| f.value(c) > ph.u_tilde));
        assert_eq!(f, build_gp_field(&map, 4, &gp, &ph, 2).unwrap());
    }

    #[test]
    fn measurement_noise_statistics() {
        let f = build_field(&empty16(), 0, &GpHyperparams::default(), &PhenomenonParams::default(), 0).unwrap();
        let mut rng = substream(0, streams::NOISE);
        assert_eq!(sample_measurement(&f, Cell(3), 0.0, &mut rng), 1.0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_measurement(&f, Cell(3), 0.2, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 0.2).abs() / 0.2 < 0.02, "{sd}");
        // Two agents at one cell in one step get different draws.
        let mut w = SimWorld::new(f, 0.2, substream(0, streams::NOISE));
        assert_ne!(w.measure(0, Cell(3), 1), w.measure(1, Cell(3), 1));
    }

    #[test]
    fn discovery_is_unique_and_first_only() {
        let field = GroundTruthField { values: vec![1.0; 4], phenomena: vec![Cell(1), Cell(3)], rng_seed: 0 };
        let mut t = DiscoveryTracker::new(2, 2);
        assert!(record_discovery(&field, 0, Cell(1), 3, &mut t));
        assert!(!record_discovery(&field, 1, Cell(1), 4, &mut t));
        assert_eq!(t.first_unique, vec![Some(3), None]);
        assert!(record_discovery(&field, 0, Cell(3), 7, &mut t));
        assert_eq!(t.first_unique, vec![Some(3), None]);
        assert_eq!(t.unique, 2);
        assert!(!record_discovery(&field, 1, Cell(0), 8, &mut t));
    }

    #[test]
    fn zero_duration_mission() {
        let out = run_mission(&scenario(Algorithm::MaV, 3, 5, 0, 1), &empty16()).unwrap();
        assert_eq!(out.metrics.unique_phenomena_discovered, 0);
        assert!(out.steps.is_empty());
        assert_eq!(out.metrics.steps_to_first_unique, vec![None; 3]);
    }

    #[test]
    fn phenomenon_free_run_has_no_discoveries() {
        let out = run_mission(&scenario(Algorithm::MaV, 2, 0, 10, 1), &empty16()).unwrap();
        assert_eq!(out.metrics.unique_phenomena_discovered, 0);
        assert_eq!(out.metrics.steps_to_first_unique, vec![None; 2]);
    }

    #[test]
    fn smoke_run_is_deterministic() {
        let config = scenario(Algorithm::MaV, 3, 5, 50, 7);
        let a = run_mission(&config, &empty16()).unwrap();
        let b = run_mission(&config, &empty16()).unwrap();
        assert_eq!(a.metrics.without_wall_time(), b.metrics.without_wall_time());
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.metrics.steps_to_first_unique.len(), 3);
        assert!(a.trajectories.iter().all(|t| t.len() == 50));
        let m = &a.metrics;
        assert!(m.nodes_expanded <= m.nodes_generated && m.nodes_generated <= m.max_possible_nodes);
        assert!(m.unique_phenomena_discovered <= 5);
        assert_eq!(m.collision_events, 0);
        // Discovery count never decreases.
        let mut found: Vec<Step> = a.discoveries.found_at.iter().flatten().copied().collect();
        found.sort_unstable();
        assert_eq!(found.len(), m.unique_phenomena_discovered);
        // Pruning does something whenever a bubble plans.
        for s in a.steps.iter().filter(|s| !s.partition.bubbles.is_empty()) {
            assert!(s.bubble_stats.nodes_generated < s.bubble_stats.max_possible_nodes);
            assert!(s.bubble_stats.nodes_generated > 0);
        }
    }

    #[test]
    fn every_algorithm_is_deterministic() {
        for alg in [Algorithm::MaV, Algorithm::SaV, Algorithm::SaVCa, Algorithm::MaMctsV] {
            let config = scenario(alg, 3, 5, 15, 11);
            let a = run_mission(&config, &empty16()).unwrap();
            let b = run_mission(&config, &empty16()).unwrap();
            assert_eq!(a.metrics.without_wall_time(), b.metrics.without_wall_time(), "{alg:?}");
        }
    }

    #[test]
    fn single_agent_algorithms_coincide() {
        let base = scenario(Algorithm::MaV, 1, 5, 25, 3);
        let map = empty16();
        let reference = run_mission(&base, &map).unwrap().trajectories;
        assert_eq!(run_baseline_sav(&base, &map).unwrap().trajectories, reference);
        assert_eq!(run_baseline_savca(&base, &map).unwrap().trajectories, reference);
        assert_eq!(run_baseline_mcts(&base, &map).unwrap().trajectories, reference);
    }

    #[test]
    fn baseline_collision_accounting() {
        let map = empty16();
        for seed in 0..3 {
            let config = scenario(Algorithm::SaV, 3, 5, 30, seed);
            assert_eq!(run_baseline_savca(&config, &map).unwrap().metrics.collision_events, 0);
            // Counted, possibly zero.
            let _ = run_baseline_sav(&config, &map).unwrap().metrics.collision_events;
        }
    }

    #[test]
    fn colocated_independent_agents_duplicate_each_other() {
        let config = ScenarioConfig { starts: Some(vec![[8, 8], [8, 8]]), ..scenario(Algorithm::SaV, 2, 5, 30, 5) };
        let out = run_baseline_sav(&config, &empty16()).unwrap();
        assert_eq!(out.trajectories[0], out.trajectories[1]);
        assert_eq!(out.metrics.collision_events, 30);
    }

    #[test]
    fn summary_censors_agents_without_a_find() {
        let a = MissionMetrics { unique_phenomena_discovered: 2, steps_to_first_unique: vec![Some(3), None], collision_events: 1, ..Default::default() };
        let b = MissionMetrics { unique_phenomena_discovered: 1, steps_to_first_unique: vec![Some(7), Some(2)], ..Default::default() };
        let c = MissionMetrics { steps_to_first_unique: vec![None], ..Default::default() };
        let run = |algorithm, metrics| SummaryInput { algorithm, duration: 10, metrics };
        let s = summarize([run(Algorithm::SaV, &c), run(Algorithm::MaV, &a), run(Algorithm::MaV, &b)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].algorithm, Algorithm::MaV);
        assert_eq!(s[0].mean_unique, 1.5);
        assert_eq!(s[0].mean_steps_to_first, 5.5);
        assert_eq!(s[0].mean_steps_to_first_finders, Some(4.0));
        assert_eq!(s[0].agents_without_find, 1);
        assert_eq!(s[0].mean_collision_events, 0.5);
        assert_eq!(s[1].mean_steps_to_first, 10.0);
        assert_eq!(s[1].mean_steps_to_first_finders, None);
    }
}
