//! Scenario loading, run records and the three subcommands behind the
//! `infomapf` binary.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use infomapf::config::{Algorithm, ConfigError, ScenarioConfig, SweepConfig, SCHEMA_VERSION};
use infomapf::grid::GridMap;
use infomapf::sim::{run_mission, summarize, AlgorithmSummary, MissionMetrics, SimError, SummaryInput};
use infomapf::validate::{run_suite, Suite, SuiteReport, ValidateOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUN_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
}

/// A failure tagged with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Run(_) => exit::RUN_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Run(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.into())
    }
}

/// A parsed scenario with its map loaded.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub config: ScenarioConfig,
    pub map: GridMap,
}

/// Reads a scenario file; map paths resolve against the file's directory.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let config = ScenarioConfig::from_toml_str(&text)?;
    let map = config.map.load(path.parent().unwrap_or(Path::new(".")))?;
    Ok(LoadedScenario { config, map })
}

pub fn load_sweep(path: &Path) -> Result<(SweepConfig, Vec<LoadedScenario>), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let sweep = SweepConfig::from_toml_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let scenarios = sweep
        .scenarios
        .iter()
        .map(|rel| load_scenario(&base.join(rel)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((sweep, scenarios))
}

/// One mission execution: its identity, parameters and metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub seed: u64,
    pub map: String,
    pub algorithm: Algorithm,
    pub num_agents: usize,
    pub num_phenomena: usize,
    pub duration: u32,
    pub horizon: usize,
    pub comm_range: usize,
    #[serde(flatten)]
    pub metrics: MissionMetrics,
}

/// The CSV form of a [`RunRecord`]: per-agent steps joined by `|`, `-` for
/// agents that never made a unique find.
#[derive(Serialize)]
struct CsvRow<'a> {
    schema_version: u32,
    run_id: &'a str,
    seed: u64,
    map: &'a str,
    algorithm: Algorithm,
    num_agents: usize,
    num_phenomena: usize,
    duration: u32,
    horizon: usize,
    comm_range: usize,
    unique_phenomena_discovered: usize,
    steps_to_first_unique: String,
    nodes_generated: u64,
    nodes_expanded: u64,
    max_possible_nodes: u64,
    reactive_yields: u64,
    wall_time: f64,
    collision_events: u64,
}

pub fn format_steps(steps: &[Option<u32>]) -> String {
    steps.iter().map(|s| s.map_or_else(|| "-".to_string(), |v| v.to_string())).collect::<Vec<_>>().join("|")
}

impl RunRecord {
    pub fn new(run_id: String, config: &ScenarioConfig, map: &GridMap, metrics: MissionMetrics) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id,
            seed: config.seed,
            map: map.name().to_string(),
            algorithm: config.algorithm,
            num_agents: config.num_agents,
            num_phenomena: config.num_phenomena,
            duration: config.duration,
            horizon: config.horizon,
            comm_range: config.comm_range,
            metrics,
        }
    }

    fn csv_row(&self) -> CsvRow<'_> {
        let m = &self.metrics;
        CsvRow {
            schema_version: self.schema_version,
            run_id: &self.run_id,
            seed: self.seed,
            map: &self.map,
            algorithm: self.algorithm,
            num_agents: self.num_agents,
            num_phenomena: self.num_phenomena,
            duration: self.duration,
            horizon: self.horizon,
            comm_range: self.comm_range,
            unique_phenomena_discovered: m.unique_phenomena_discovered,
            steps_to_first_unique: format_steps(&m.steps_to_first_unique),
            nodes_generated: m.nodes_generated,
            nodes_expanded: m.nodes_expanded,
            max_possible_nodes: m.max_possible_nodes,
            reactive_yields: m.reactive_yields,
            wall_time: m.wall_time,
            collision_events: m.collision_events,
        }
    }
}

/// `{index:05}-{scenario}-{algorithm}-s{seed}`; the index keeps sweep order
/// when sorted.
pub fn run_id(index: usize, scenario: &str, algorithm: Algorithm, seed: u64) -> String {
    format!("{index:05}-{scenario}-{algorithm}-s{seed}")
}

/// Writes `records.csv` and `records.jsonl` into `dir`.
pub fn write_records(dir: &Path, records: &[RunRecord]) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let csv_path = dir.join("records.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("cannot write {}", csv_path.display()))?;
    for r in records {
        w.serialize(r.csv_row())?;
    }
    w.flush()?;
    let json_path = dir.join("records.jsonl");
    let mut f = fs::File::create(&json_path).with_context(|| format!("cannot write {}", json_path.display()))?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_summary(dir: &Path, summary: &[AlgorithmSummary]) -> anyhow::Result<()> {
    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    for s in summary {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

fn run_one(index: usize, scenario: &LoadedScenario) -> Result<RunRecord, SimError> {
    let out = run_mission(&scenario.config, &scenario.map)?;
    Ok(RunRecord::new(
        run_id(index, &scenario.config.name, scenario.config.algorithm, scenario.config.seed),
        &scenario.config,
        &scenario.map,
        out.metrics,
    ))
}

/// Runs one scenario and writes its record. Nothing is written on failure.
pub fn cmd_run(scenario: &Path, seed: Option<u64>, out: &Path) -> Result<RunRecord, CliError> {
    let mut loaded = load_scenario(scenario)?;
    if let Some(seed) = seed {
        loaded.config.seed = seed;
    }
    let record = run_one(0, &loaded).map_err(|e| match e {
        SimError::Config(e) => CliError::Usage(e.into()),
        e => CliError::Run(e.into()),
    })?;
    write_records(out, std::slice::from_ref(&record)).map_err(CliError::Run)?;
    Ok(record)
}

/// Result of a sweep: successful records sorted by run id, and failures.
#[derive(Debug)]
pub struct BenchOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<(String, String)>,
    pub summary: Vec<AlgorithmSummary>,
}

/// Runs every scenario × algorithm × seed combination on `workers` threads
/// (0 lets the pool decide).
pub fn cmd_bench(sweep: &Path, out: &Path, workers: usize) -> Result<BenchOutcome, CliError> {
    let (sweep, scenarios) = load_sweep(sweep)?;
    let mut jobs = Vec::new();
    for scenario in &scenarios {
        for &algorithm in &sweep.algorithms {
            for seed in sweep.seeds() {
                let config = ScenarioConfig { algorithm, seed, ..scenario.config.clone() };
                jobs.push(LoadedScenario { config, map: scenario.map.clone() });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Run(e.into()))?;
    let results: Vec<(String, Result<RunRecord, SimError>)> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(i, job)| (run_id(i, &job.config.name, job.config.algorithm, job.config.seed), run_one(i, job)))
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, result) in results {
        match result {
            Ok(r) => records.push(r),
            Err(e) => failures.push((id, e.to_string())),
        }
    }
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let summary = summarize(records.iter().map(|r| SummaryInput { algorithm: r.algorithm, duration: r.duration, metrics: &r.metrics }));
    write_records(out, &records).map_err(CliError::Run)?;
    write_summary(out, &summary).map_err(CliError::Run)?;
    Ok(BenchOutcome { records, failures, summary })
}

/// Runs the requested property suites; all defaults when `suites` is empty.
pub fn cmd_validate(suites: &[Suite], opts: &ValidateOptions) -> Result<Vec<SuiteReport>, CliError> {
    let suites: Vec<Suite> = if suites.is_empty() { Suite::DEFAULT.to_vec() } else { suites.to_vec() };
    suites
        .into_iter()
        .map(|s| run_suite(s, opts).map_err(|e| CliError::Run(e.into())))
        .collect()
}

/// Human-readable per-algorithm table.
pub fn format_summary(summary: &[AlgorithmSummary]) -> String {
    let mut s = format!(
        "{:<10} {:>5} {:>12} {:>11} {:>13} {:>10}\n",
        "algorithm", "runs", "mean unique", "first step", "(finders)", "collisions"
    );
    for a in summary {
        let finders = a.mean_steps_to_first_finders.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        s.push_str(&format!(
            "{:<10} {:>5} {:>12.3} {:>11.2} {:>13} {:>10.2}\n",
            a.algorithm.name(),
            a.runs,
            a.mean_unique,
            a.mean_steps_to_first,
            finders,
            a.mean_collision_events
        ));
    }
    s
}
