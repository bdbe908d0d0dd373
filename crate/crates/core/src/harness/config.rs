//! Experiment configuration, read from TOML.
//!
//! ```toml
//! master_seed = 7
//! iterations = 400
//! rounds = 5
//! strategies = ["cmtab", "ia", "us", "fd"]
//! output_dir = "runs"
//!
//! [environment]
//! preset = "random-3x3-v1"
//!
//! [teams]
//! kind = "random"
//! count = 6
//! species = 4
//! count_range = [1, 10]
//!
//! [cmtab]
//! grid_resolution = 5
//! neighborhood_size = 10
//! beta = { kind = "gp-ucb", delta = 0.1 }
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::StrategyKind;
use crate::cmtab::CmtabConfig;
use crate::environment::{EnvironmentPreset, ORACLE_NODE_BUDGET};
use crate::error::{Error, Result};
use crate::gp::KernelConfig;
use crate::problem::Team;
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub preset: String,
    /// Fixed environment seed; derived from the master seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Overrides the preset's observation noise.
    #[serde(default)]
    pub noise_std: Option<f64>,
}

/// Where the online teams come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TeamSource {
    Random {
        count: usize,
        species: usize,
        count_range: (u32, u32),
    },
    Explicit {
        members: Vec<Team>,
    },
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_oracle_budget() -> usize {
    ORACLE_NODE_BUDGET
}

fn default_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub iterations: usize,
    pub rounds: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads; zero uses the machine's parallelism.
    #[serde(default)]
    pub workers: usize,
    /// Optional demonstration file used to initialize every run's models.
    #[serde(default)]
    pub demonstrations: Option<PathBuf>,
    pub environment: EnvironmentConfig,
    pub teams: TeamSource,
    #[serde(default)]
    pub cmtab: CmtabConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_oracle_budget")]
    pub oracle_node_budget: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.demonstrations = cfg.demonstrations.map(|d| base.join(d));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(&self) -> Result<EnvironmentPreset> {
        let mut preset = EnvironmentPreset::named(&self.environment.preset)?;
        if let Some(noise) = self.environment.noise_std {
            preset.noise_std = noise;
        }
        Ok(preset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        let mut seen = self.strategies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.strategies.len() {
            return Err(Error::Config("strategies must not repeat".into()));
        }
        let preset = self.preset()?;
        preset.validate()?;
        if let Some(noise) = self.environment.noise_std {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(Error::Config(format!("noise_std must be nonnegative, got {noise}")));
            }
        }
        match &self.teams {
            TeamSource::Random {
                count,
                species,
                count_range,
            } => {
                if *count == 0 || *species == 0 {
                    return Err(Error::Config("random teams need count and species >= 1".into()));
                }
                if count_range.0 == 0 || count_range.0 > count_range.1 {
                    return Err(Error::Config(format!(
                        "count_range must satisfy 1 <= lo <= hi, got {count_range:?}"
                    )));
                }
            }
            TeamSource::Explicit { members } => {
                if members.is_empty() {
                    return Err(Error::Config("explicit team list is empty".into()));
                }
                if let Some(t) = members.iter().find(|t| t.trait_count() != preset.traits) {
                    return Err(Error::Config(format!(
                        "team has {} traits, preset `{}` has {}",
                        t.trait_count(),
                        preset.name,
                        preset.traits
                    )));
                }
            }
        }
        self.cmtab.validate()?;
        self.kernel.validate()?;
        if self.solver.node_budget == 0 || self.oracle_node_budget == 0 {
            return Err(Error::Config("node budgets must be positive".into()));
        }
        if self.iterations < 2 && self.strategies.iter().any(|s| *s != StrategyKind::Us) {
            // the confidence radius needs ln N > 0
            return Err(Error::Config("model-based strategies need at least 2 iterations".into()));
        }
        Ok(())
    }
}
