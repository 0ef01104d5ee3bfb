//! Scenario and sweep files.
//!
//! Both are TOML with a mandatory `schema_version`. Unknown keys are
//! rejected so that typos surface as errors naming the key.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{GpHyperparams, PhenomenonParams};
use crate::grid::{GridMap, MapError};
use crate::info_gain::GainConfig;
use crate::mcts::MctsConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("map {path}: {source}")]
    Map { path: PathBuf, source: MapError },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid { field: field.into(), reason: reason.into() }
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Joint A* inside bubbles, forward search outside.
    #[default]
    #[serde(rename = "ma-v")]
    MaV,
    #[serde(rename = "sa-v")]
    SaV,
    #[serde(rename = "sa-v-ca")]
    SaVCa,
    #[serde(rename = "ma-mcts-v")]
    MaMctsV,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::MaV, Algorithm::SaV, Algorithm::SaVCa, Algorithm::MaMctsV];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MaV => "ma-v",
            Algorithm::SaV => "sa-v",
            Algorithm::SaVCa => "sa-v-ca",
            Algorithm::MaMctsV => "ma-mcts-v",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSource {
    /// MovingAI `.map` file, relative to the scenario file.
    File(PathBuf),
    Empty { width: usize, height: usize },
}

impl MapSource {
    /// Loads or builds the map. Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<GridMap, ConfigError> {
        match self {
            MapSource::Empty { width, height } => GridMap::empty(*width, *height, format!("empty-{width}-{height}"))
                .map_err(|source| ConfigError::Map { path: PathBuf::from("<empty>"), source }),
            MapSource::File(rel) => {
                let path = if rel.is_absolute() { rel.clone() } else { base.join(rel) };
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                GridMap::parse(&text, name).map_err(|source| ConfigError::Map { path, source })
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiscoveryRule {
    /// Occupying the phenomenon cell locates it.
    Visit,
    /// Occupancy plus a posterior phenomenon probability of at least `threshold`.
    Belief { threshold: f64 },
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Unit bumps on a flat mean.
    #[default]
    Bumps,
    /// Draw from the GP prior, phenomena at super-threshold cells.
    GpPrior,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    pub pruning: bool,
    pub tight_heuristic: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { pruning: true, tight_heuristic: false }
    }
}

/// Everything that defines one mission except the map contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub map: MapSource,
    pub num_agents: usize,
    pub num_phenomena: usize,
    /// Mission length `H` in steps.
    pub duration: u32,
    /// Planning horizon `δ`.
    pub horizon: usize,
    /// Communication range `r` (Manhattan).
    pub comm_range: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// `[row, col]` per agent; random distinct cells if absent.
    pub starts: Option<Vec<[usize; 2]>>,
    pub gp: GpHyperparams,
    pub phenomenon: PhenomenonParams,
    pub gain: GainConfig,
    pub search: SearchOptions,
    pub mcts: MctsConfig,
    pub discovery: DiscoveryRule,
    pub field: FieldKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            name: "scenario".into(),
            map: MapSource::Empty { width: 16, height: 16 },
            num_agents: 3,
            num_phenomena: 5,
            duration: 50,
            horizon: 2,
            comm_range: 5,
            algorithm: Algorithm::MaV,
            seed: 0,
            starts: None,
            gp: GpHyperparams::default(),
            phenomenon: PhenomenonParams::default(),
            gain: GainConfig::default(),
            search: SearchOptions::default(),
            mcts: MctsConfig::default(),
            discovery: DiscoveryRule::Visit,
            field: FieldKind::Bumps,
        }
    }
}

fn check_schema(found: u32) -> Result<(), ConfigError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(ConfigError::Schema { found })
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_schema(self.schema_version)?;
        if self.horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        if self.num_agents == 0 {
            return Err(ConfigError::invalid("num_agents", "must be at least 1"));
        }
        if let Some(starts) = &self.starts {
            if starts.len() != self.num_agents {
                return Err(ConfigError::invalid(
                    "starts",
                    format!("{} entries for {} agents", starts.len(), self.num_agents),
                ));
            }
        }
        if self.mcts.iterations == 0 {
            return Err(ConfigError::invalid("mcts.iterations", "must be at least 1"));
        }
        if !(self.mcts.exploration >= 0.0 && self.mcts.exploration.is_finite()) {
            return Err(ConfigError::invalid("mcts.exploration", "must be finite and non-negative"));
        }
        if let DiscoveryRule::Belief { threshold } = self.discovery {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(ConfigError::invalid("discovery.threshold", "must lie in [0, 1]"));
            }
        }
        if self.gain.quadrature_order == 0 || self.gain.quadrature_order > crate::info_gain::MAX_ORDER {
            return Err(ConfigError::invalid("gain.quadrature_order", format!("must lie in 1..={}", crate::info_gain::MAX_ORDER)));
        }
        self.gp.validate().map_err(|e| ConfigError::invalid("gp", e.to_string()))?;
        self.phenomenon.validate().map_err(|e| ConfigError::invalid("phenomenon", e.to_string()))?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedRange {
    pub first: u64,
    pub count: u64,
}

/// Cartesian product of scenarios, algorithms and seeds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    /// Scenario files, relative to the sweep file.
    pub scenarios: Vec<PathBuf>,
    pub algorithms: Vec<Algorithm>,
    pub seeds: SeedRange,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let sweep: SweepConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        check_schema(sweep.schema_version)?;
        if sweep.scenarios.is_empty() {
            return Err(ConfigError::invalid("scenarios", "at least one scenario is required"));
        }
        if sweep.algorithms.is_empty() {
            return Err(ConfigError::invalid("algorithms", "at least one algorithm is required"));
        }
        Ok(sweep)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds.count).map(|k| self.seeds.first + k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
schema_version = 1
name = "demo"
map = { empty = { width = 8, height = 6 } }
num_agents = 2
num_phenomena = 3
duration = 20
algorithm = "sa-v-ca"
seed = 4

[gp]
theta2 = 0.5

[discovery]
rule = "belief"
threshold = 0.9
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ScenarioConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(c.algorithm, Algorithm::SaVCa);
        assert_eq!(c.horizon, 2);
        assert_eq!(c.comm_range, 5);
        assert_eq!(c.gp.theta2, 0.5);
        assert_eq!(c.gp.theta1, 0.4);
        assert_eq!(c.discovery, DiscoveryRule::Belief { threshold: 0.9 });
        assert_eq!(c.map.load(Path::new(".")).unwrap().width(), 8);
        assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ScenarioConfig::from_toml_str("schema_version = 1\nnum_agnets = 3\n").unwrap_err();
        assert!(e.to_string().contains("num_agnets"), "{e}");
        let e = ScenarioConfig::from_toml_str("schema_version = 1\nhorizon = 0\n").unwrap_err();
        assert!(e.to_string().contains("horizon"), "{e}");
        let e = ScenarioConfig::from_toml_str("schema_version = 2\n").unwrap_err();
        assert!(matches!(e, ConfigError::Schema { found: 2 }));
        let e = ScenarioConfig::from_toml_str("schema_version = 1\n[gp]\nsigma = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("gp"), "{e}");
        let e = ScenarioConfig::from_toml_str("schema_version = 1\nnum_agents = 2\nstarts = [[0, 0]]\n").unwrap_err();
        assert!(e.to_string().contains("starts"), "{e}");
    }

    #[test]
    fn missing_map_file_names_the_path() {
        let src = MapSource::File("nowhere/missing.map".into());
        let e = src.load(Path::new("/tmp")).unwrap_err();
        assert!(e.to_string().contains("/tmp/nowhere/missing.map"), "{e}");
    }

    #[test]
    fn sweep_parses() {
        let s = SweepConfig::from_toml_str(
            "schema_version = 1\nscenarios = [\"a.toml\"]\nalgorithms = [\"ma-v\", \"sa-v\"]\nseeds = { first = 3, count = 2 }\n",
        )
        .unwrap();
        assert_eq!(s.seeds().collect::<Vec<_>>(), vec![3, 4]);
        assert!(SweepConfig::from_toml_str("schema_version = 1\nscenarios = []\nalgorithms = [\"ma-v\"]\nseeds = { first = 0, count = 1 }\n").is_err());
    }
}
