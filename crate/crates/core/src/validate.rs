//! Randomized property suites with replayable counterexamples.
//!
//! Trial `k` of a suite run with master seed `s` draws its instance from
//! seed `s + k` alone, so a failure replays with `--seed <s + k> --trials 1`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{phenomenon_probability, BeliefState, GpHyperparams, Observation, PhenomenonParams};
use crate::grid::{Cell, GridMap};
use crate::info_gain::{GainConfig, GainError, InfoGain, QuadratureRule};
use crate::search::{h_value, joint_children, multi_agent_search, single_agent_forward_search, SearchConfig};

/// Absolute slack on every inequality between gains.
pub const GAIN_TOL: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Admissibility,
    Oracle,
    Pruning,
    Quadrature,
    Anchors,
    /// Additive relaxation of a random joint plan. Diagnostic: the gain is
    /// not exactly subadditive, so rare small violations are expected.
    Lemma,
    /// `g + h` at every child of the root. Diagnostic, for the same reason.
    NodeBound,
}

impl Suite {
    /// Suites run when none is named.
    pub const DEFAULT: [Suite; 5] = [Suite::Admissibility, Suite::Oracle, Suite::Pruning, Suite::Quadrature, Suite::Anchors];
    pub const ALL: [Suite; 7] =
        [Suite::Admissibility, Suite::Oracle, Suite::Pruning, Suite::Quadrature, Suite::Anchors, Suite::Lemma, Suite::NodeBound];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Admissibility => "admissibility",
            Suite::Oracle => "oracle",
            Suite::Pruning => "pruning",
            Suite::Quadrature => "quadrature",
            Suite::Anchors => "anchors",
            Suite::Lemma => "lemma",
            Suite::NodeBound => "node-bound",
        }
    }

    pub fn parse(name: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Trials used when the caller does not choose.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Admissibility | Suite::Lemma | Suite::NodeBound => 1000,
            Suite::Oracle | Suite::Pruning => 50,
            Suite::Quadrature | Suite::Anchors => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub seed: u64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    /// Individual checks performed.
    pub checks: usize,
    pub failures: Vec<Counterexample>,
    /// Suite-level condition not tied to one instance, if violated.
    pub aggregate_failure: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.aggregate_failure.is_none()
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "[{status}] {}: {} checks, {} failures", self.suite.name(), self.checks, self.failures.len())?;
        if let Some(c) = self.failures.first() {
            write!(f, "; first counterexample seed {} ({})", c.seed, c.detail)?;
        }
        if let Some(a) = &self.aggregate_failure {
            write!(f, "; {a}")?;
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ValidateOptions {
    pub trials: Option<usize>,
    pub seed: u64,
    pub quadrature_order: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { trials: None, seed: 0, quadrature_order: 5 }
    }
}

/// A random search state.
#[derive(Clone, Debug)]
pub struct Instance {
    pub map: GridMap,
    pub belief: BeliefState,
    pub positions: Vec<Cell>,
}

/// Options for [`random_instance`].
#[derive(Copy, Clone, Debug)]
pub struct InstanceShape {
    pub min_side: usize,
    pub max_side: usize,
    pub agents: (usize, usize),
    pub obstacle_density: f64,
    /// Observations per agent trail, or in total when `trails` is off.
    pub max_history: usize,
    /// Histories are the agents' own random-walk trails rather than
    /// uniformly scattered cells.
    pub trails: bool,
    pub gp: GpHyperparams,
}

impl InstanceShape {
    /// Random maps up to 8×8 with light obstacles, 2–3 agents.
    pub fn small() -> Self {
        InstanceShape {
            min_side: 3,
            max_side: 8,
            agents: (2, 3),
            obstacle_density: 0.15,
            max_history: 8,
            trails: true,
            gp: GpHyperparams::default(),
        }
    }

    /// Empty 8×8, two agents, under the default hyperparameters.
    pub fn empty8() -> Self {
        InstanceShape { min_side: 8, max_side: 8, agents: (2, 2), obstacle_density: 0.0, ..Self::small() }
    }

    /// Empty 8×8, two agents, with a correlated kernel and longer trails.
    /// The default length scale leaves cells nearly independent; the
    /// per-agent bound is then almost exact, and pruning rarely has anything
    /// left to cut.
    pub fn correlated8() -> Self {
        InstanceShape {
            max_history: 12,
            gp: GpHyperparams { theta2: CORRELATED_THETA2, ..GpHyperparams::default() },
            ..Self::empty8()
        }
    }
}

/// Length scale of [`InstanceShape::correlated8`].
pub const CORRELATED_THETA2: f64 = 0.5;

/// Draws a map, distinct agent cells and a short random history from `seed`.
pub fn random_instance(seed: u64, shape: &InstanceShape) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = rng.random_range(shape.agents.0..=shape.agents.1);
    let (map, passable) = loop {
        let w = rng.random_range(shape.min_side..=shape.max_side);
        let h = rng.random_range(shape.min_side..=shape.max_side);
        let blocked: Vec<bool> = (0..w * h).map(|_| rng.random_bool(shape.obstacle_density)).collect();
        let map = GridMap::from_blocked(w, h, blocked, format!("random-{seed}")).expect("dimensions positive");
        let passable: Vec<Cell> = map.passable_cells().collect();
        if passable.len() > agents {
            break (map, passable);
        }
    };
    let mut pool = passable.clone();
    let positions: Vec<Cell> = (0..agents).map(|_| pool.swap_remove(rng.random_range(0..pool.len()))).collect();
    let mut belief = BeliefState::prior(&map, shape.gp, PhenomenonParams::default()).expect("valid defaults");
    let mut obs = Vec::new();
    if shape.trails {
        // Each agent walked here; its trail, current cell included, is observed.
        for (a, &end) in positions.iter().enumerate() {
            let mut cell = end;
            for _ in 0..rng.random_range(0..=shape.max_history) {
                obs.push((a, cell));
                let moves = map.feasible_actions(cell);
                cell = map.step(cell, moves[rng.random_range(0..moves.len())]).unwrap_or(cell);
            }
        }
    } else {
        for t in 0..rng.random_range(0..=shape.max_history) {
            obs.push((t % agents, passable[rng.random_range(0..passable.len())]));
        }
    }
    for (t, (agent, cell)) in obs.into_iter().enumerate() {
        let value = rng.random_range(0.5..2.2);
        belief.observe(Observation { agent, time: t as u32, cell, value }).expect("finite");
    }
    Instance { map, belief, positions }
}

/// Calls `visit` with the cells of every collision-free joint continuation
/// of `steps` steps from `positions`, appended to `committed`.
pub fn for_each_joint_leaf<F>(
    map: &GridMap,
    positions: &[Cell],
    steps: usize,
    committed: &mut Vec<Cell>,
    visit: &mut F,
) -> Result<(), GainError>
where
    F: FnMut(&[Cell]) -> Result<(), GainError>,
{
    if steps == 0 {
        return visit(committed);
    }
    for (_, targets) in joint_children(map, positions) {
        let n = committed.len();
        committed.extend(&targets);
        for_each_joint_leaf(map, &targets, steps - 1, committed, visit)?;
        committed.truncate(n);
    }
    Ok(())
}

/// Best expected gain over all collision-free joint plans by enumeration.
pub fn exhaustive_best(gain: &InfoGain, inst: &Instance, horizon: usize) -> Result<f64, GainError> {
    let mut best = f64::NEG_INFINITY;
    for_each_joint_leaf(&inst.map, &inst.positions, horizon, &mut Vec::new(), &mut |cells| {
        best = best.max(gain.expected_gain_cells(&inst.belief, cells)?);
        Ok(())
    })?;
    Ok(best)
}

fn gain_for(order: usize) -> Result<InfoGain, GainError> {
    InfoGain::new(GainConfig { quadrature_order: order, ..GainConfig::default() })
}

/// The two admissibility levels checked against exhaustive enumeration.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BoundLevel {
    /// `h(s)` at the state itself against every horizon leaf below it.
    State,
    /// `g(c) + h(c)` at each child `c` against every leaf below `c`.
    Child,
}

/// Checks the heuristic at `level` on one instance; returns the number of
/// comparisons and the worst violation beyond [`GAIN_TOL`].
pub fn check_bounds(
    gain: &InfoGain,
    inst: &Instance,
    horizon: usize,
    level: BoundLevel,
) -> Result<(usize, Option<String>), GainError> {
    let mut checks = 0;
    let root_h = h_value(gain, &inst.belief, &inst.map, &inst.positions, 0, horizon)?.h;
    let mut worst: Option<(f64, String)> = None;
    let mut note = |excess: f64, what: &dyn Fn() -> String| {
        if excess > GAIN_TOL && worst.as_ref().is_none_or(|(w, _)| excess > *w) {
            worst = Some((excess, what()));
        }
    };
    for (acts, targets) in joint_children(&inst.map, &inst.positions) {
        let g = gain.expected_gain_cells(&inst.belief, &targets)?;
        let h = match level {
            BoundLevel::State => 0.0,
            BoundLevel::Child => h_value(gain, &inst.belief, &inst.map, &targets, 1, horizon)?.h,
        };
        let mut committed = targets.clone();
        for_each_joint_leaf(&inst.map, &targets, horizon - 1, &mut committed, &mut |cells| {
            let leaf = gain.expected_gain_cells(&inst.belief, cells)?;
            checks += 1;
            match level {
                BoundLevel::State => note(leaf - root_h, &|| format!("h={root_h:.9e} < leaf g={leaf:.9e}")),
                BoundLevel::Child => {
                    note(leaf - (g + h), &|| format!("child {acts:?}: g+h={:.9e} < leaf g={leaf:.9e}", g + h))
                }
            }
            Ok(())
        })?;
    }
    Ok((checks, worst.map(|(_, w)| w)))
}

fn bounds(opts: &ValidateOptions, trials: usize, suite: Suite, level: BoundLevel) -> Result<SuiteReport, GainError> {
    let gain = gain_for(opts.quadrature_order)?;
    let mut report = SuiteReport { suite, checks: 0, failures: Vec::new(), aggregate_failure: None };
    for k in 0..trials as u64 {
        let seed = opts.seed.wrapping_add(k);
        let inst = random_instance(seed, &InstanceShape::small());
        let (checks, failure) = check_bounds(&gain, &inst, 2, level)?;
        report.checks += checks;
        if let Some(detail) = failure {
            report.failures.push(Counterexample { seed, detail });
        }
    }
    Ok(report)
}

fn oracle(opts: &ValidateOptions, trials: usize) -> Result<SuiteReport, GainError> {
    let gain = gain_for(opts.quadrature_order)?;
    let mut report = SuiteReport { suite: Suite::Oracle, checks: 0, failures: Vec::new(), aggregate_failure: None };
    for k in 0..trials as u64 {
        let seed = opts.seed.wrapping_add(k);
        let inst = random_instance(seed, &InstanceShape::correlated8());
        let out = multi_agent_search(&gain, &inst.belief, &inst.map, &inst.positions, SearchConfig::new(2))?;
        let best = exhaustive_best(&gain, &inst, 2)?;
        report.checks += 1;
        if (out.plan.value - best).abs() > GAIN_TOL || out.plan.has_conflict(&inst.positions) {
            report.failures.push(Counterexample { seed, detail: format!("search {:.12e} vs exhaustive {best:.12e}", out.plan.value) });
        }
        // Singleton bubble equals forward search.
        let solo = &inst.positions[..1];
        let a = multi_agent_search(&gain, &inst.belief, &inst.map, solo, SearchConfig::new(2))?;
        let b = single_agent_forward_search(&gain, &inst.belief, &inst.map, solo[0], 2)?;
        report.checks += 1;
        if a.plan.actions != b.actions || (a.plan.value - b.value).abs() > GAIN_TOL {
            report.failures.push(Counterexample { seed, detail: "singleton search differs from forward search".into() });
        }
    }
    Ok(report)
}

/// Pruned vs unpruned node counts on one instance.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct PruningSample {
    pub value_on: f64,
    pub value_off: f64,
    pub generated_on: u64,
    pub generated_off: u64,
}

pub fn pruning_sample(gain: &InfoGain, inst: &Instance) -> Result<PruningSample, GainError> {
    let on = multi_agent_search(gain, &inst.belief, &inst.map, &inst.positions, SearchConfig::new(2))?;
    let off = multi_agent_search(gain, &inst.belief, &inst.map, &inst.positions, SearchConfig { pruning: false, ..SearchConfig::new(2) })?;
    Ok(PruningSample {
        value_on: on.plan.value,
        value_off: off.plan.value,
        generated_on: on.stats.nodes_generated,
        generated_off: off.stats.nodes_generated,
    })
}

/// Fraction of instances on which pruning must strictly reduce generation.
pub const PRUNING_STRICT_FRACTION: f64 = 0.8;

fn pruning(opts: &ValidateOptions, trials: usize) -> Result<SuiteReport, GainError> {
    pruning_on(opts, trials, &InstanceShape::correlated8())
}

/// The pruning suite over an arbitrary instance distribution.
pub fn pruning_on(opts: &ValidateOptions, trials: usize, shape: &InstanceShape) -> Result<SuiteReport, GainError> {
    let gain = gain_for(opts.quadrature_order)?;
    let mut report = SuiteReport { suite: Suite::Pruning, checks: 0, failures: Vec::new(), aggregate_failure: None };
    let mut strict = 0;
    for k in 0..trials as u64 {
        let seed = opts.seed.wrapping_add(k);
        let s = pruning_sample(&gain, &random_instance(seed, shape))?;
        report.checks += 1;
        if (s.value_on - s.value_off).abs() > GAIN_TOL || s.generated_on > s.generated_off {
            report.failures.push(Counterexample {
                seed,
                detail: format!("values {:.6e}/{:.6e}, generated {}/{}", s.value_on, s.value_off, s.generated_on, s.generated_off),
            });
        }
        strict += usize::from(s.generated_on < s.generated_off);
    }
    let fraction = strict as f64 / trials.max(1) as f64;
    if fraction < PRUNING_STRICT_FRACTION {
        report.aggregate_failure = Some(format!("strict reduction on {fraction:.2} of instances"));
    }
    Ok(report)
}

/// `E[Y^k]` for `Y ~ N(μ, σ²)` via the binomial expansion of central moments.
pub fn gaussian_raw_moment(mu: f64, sd: f64, k: u32) -> f64 {
    (0..=k)
        .filter(|j| j % 2 == 0)
        .map(|j| {
            let binom = (0..j).fold(1.0, |acc, i| acc * f64::from(k - i) / f64::from(i + 1));
            let central: f64 = (1..j).step_by(2).map(f64::from).product();
            binom * mu.powi((k - j) as i32) * central * sd.powi(j as i32)
        })
        .sum()
}

/// Gain on a three-cell corridor with correlated, noisy cells, used as the
/// convergence reference instance.
pub fn convergence_instance() -> (BeliefState, Vec<Cell>) {
    let map = GridMap::empty(3, 1, "three").expect("nonempty");
    let gp = GpHyperparams { theta2: 1.0, sigma: 1.0, ..GpHyperparams::default() };
    let belief = BeliefState::prior(&map, gp, PhenomenonParams::default()).expect("valid");
    (belief, vec![Cell(0), Cell(1), Cell(2)])
}

fn quadrature(opts: &ValidateOptions) -> Result<SuiteReport, GainError> {
    let rule = QuadratureRule::gauss_hermite(opts.quadrature_order)?;
    let mut report = SuiteReport { suite: Suite::Quadrature, checks: 0, failures: Vec::new(), aggregate_failure: None };
    for (case, &(mu, sd)) in [(0.0, 1.0), (1.0, 0.2), (1.4, 0.632), (-2.0, 1.5)].iter().enumerate() {
        for k in 0..=9u32 {
            let exact = gaussian_raw_moment(mu, sd, k);
            let got = rule.expect(mu, sd, |y| y.powi(k as i32));
            let err = if exact == 0.0 { got.abs() } else { ((got - exact) / exact).abs() };
            report.checks += 1;
            if err > 1e-9 {
                report.failures.push(Counterexample { seed: case as u64, detail: format!("E[Y^{k}] at μ={mu}, σ={sd}: rel err {err:.2e}") });
            }
        }
    }
    let (belief, cells) = convergence_instance();
    let got = gain_for(opts.quadrature_order)?.expected_gain_cells(&belief, &cells)?;
    let reference = gain_for(20)?.expected_gain_cells(&belief, &cells)?;
    let rel = ((got - reference) / reference).abs();
    report.checks += 1;
    if rel > 1e-3 {
        report.aggregate_failure = Some(format!("three-cell gain {got:.6e} vs order-20 {reference:.6e} (rel {rel:.2e})"));
    }
    Ok(report)
}

fn anchors() -> SuiteReport {
    let ph = PhenomenonParams::default();
    let var = 0.04;
    let off = 10.0 * (2.0f64 * var).sqrt();
    let mut report = SuiteReport { suite: Suite::Anchors, checks: 0, failures: Vec::new(), aggregate_failure: None };
    for (mu, expected) in [(ph.u_tilde, 0.491), (ph.u_tilde + off, ph.p1), (ph.u_tilde - off, ph.p2)] {
        let got = phenomenon_probability(mu, var, &ph);
        report.checks += 1;
        if (got - expected).abs() > 1e-6 {
            report.failures.push(Counterexample { seed: 0, detail: format!("p(μ={mu:.4}) = {got} (expected {expected})") });
        }
    }
    report
}

/// Joint gain of a random collision-free joint plan against the sum of
/// each agent's own gain on the same history.
pub fn check_lemma(gain: &InfoGain, inst: &Instance, seed: u64, horizon: usize) -> Result<Option<String>, GainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let m = inst.positions.len();
    let mut paths = vec![Vec::new(); m];
    let mut positions = inst.positions.clone();
    for _ in 0..horizon {
        let options = joint_children(&inst.map, &positions);
        let (_, targets) = options[rng.random_range(0..options.len())].clone();
        for j in 0..m {
            paths[j].push(targets[j]);
        }
        positions = targets;
    }
    let joint: Vec<Cell> = paths.iter().flatten().copied().collect();
    let joint_gain = gain.expected_gain_cells(&inst.belief, &joint)?;
    let mut sum = 0.0;
    for p in &paths {
        sum += gain.expected_gain_cells(&inst.belief, p)?;
    }
    Ok((joint_gain > sum + GAIN_TOL).then(|| format!("joint {joint_gain:.6e} > sum {sum:.6e}")))
}

fn lemma(opts: &ValidateOptions, trials: usize) -> Result<SuiteReport, GainError> {
    let gain = gain_for(opts.quadrature_order)?;
    let mut report = SuiteReport { suite: Suite::Lemma, checks: 0, failures: Vec::new(), aggregate_failure: None };
    for k in 0..trials as u64 {
        let seed = opts.seed.wrapping_add(k);
        let inst = random_instance(seed, &InstanceShape::small());
        report.checks += 1;
        if let Some(detail) = check_lemma(&gain, &inst, seed, 2)? {
            report.failures.push(Counterexample { seed, detail });
        }
    }
    Ok(report)
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<SuiteReport, GainError> {
    let trials = opts.trials.unwrap_or_else(|| suite.default_trials());
    match suite {
        Suite::Admissibility => bounds(opts, trials, suite, BoundLevel::State),
        Suite::NodeBound => bounds(opts, trials, suite, BoundLevel::Child),
        Suite::Oracle => oracle(opts, trials),
        Suite::Pruning => pruning(opts, trials),
        Suite::Quadrature => quadrature(opts),
        Suite::Anchors => Ok(anchors()),
        Suite::Lemma => lemma(opts, trials),
    }
}
