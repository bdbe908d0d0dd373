//! Offline demonstrations: file format, validation, and model bootstrapping.
//!
//! A demonstration file holds one JSON object per line:
//! `{"X": [[..]], "Q": [[..]], "counts": [..], "rewards": [..]}` where `X` is
//! the demonstrating team's assignment, `Q` and `counts` describe that team,
//! and `rewards` lists the observed reward of every task.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::environment::GroundTruthEnvironment;
use crate::error::{Error, Result};
use crate::gp::{prior_from_demonstrations, KernelConfig, TraitRewardModel};
use crate::problem::{Assignment, Team, TraitAllocation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demonstration {
    #[serde(rename = "X")]
    pub assignment: Assignment,
    #[serde(rename = "Q")]
    pub traits: Vec<Vec<f64>>,
    pub counts: Vec<u32>,
    pub rewards: Vec<f64>,
}

/// Validated demonstrations with their normalized trait matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemonstrationSet {
    records: Vec<Demonstration>,
    normalized: Vec<TraitAllocation>,
}

fn reject(index: usize, reason: impl Into<String>) -> Error {
    Error::Demonstration {
        index,
        reason: reason.into(),
    }
}

impl Demonstration {
    /// Checks the record against its own team and returns `normalize(X Q)`
    /// under that team's capacities.
    fn normalized(&self, index: usize) -> Result<TraitAllocation> {
        let team = Team::new(self.counts.clone(), self.traits.clone())
            .map_err(|e| reject(index, format!("invalid team: {e}")))?;
        let y = team
            .check_assignment(&self.assignment)
            .and_then(|()| team.normalized_allocation(&self.assignment))
            .map_err(|e| reject(index, format!("invalid assignment: {e}")))?;
        if self.rewards.len() != self.assignment.tasks() {
            return Err(reject(
                index,
                format!(
                    "{} rewards for {} tasks",
                    self.rewards.len(),
                    self.assignment.tasks()
                ),
            ));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(reject(index, "rewards must be finite"));
        }
        Ok(y)
    }
}

impl DemonstrationSet {
    pub fn new(records: Vec<Demonstration>) -> Result<Self> {
        let normalized = records
            .iter()
            .enumerate()
            .map(|(i, r)| r.normalized(i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = normalized.first() {
            let shape = (first.tasks(), first.traits());
            if let Some(i) = normalized
                .iter()
                .position(|y| (y.tasks(), y.traits()) != shape)
            {
                return Err(reject(
                    i,
                    format!("shape differs from the first record's {shape:?}"),
                ));
            }
        }
        Ok(DemonstrationSet {
            records,
            normalized,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Demonstration] {
        &self.records
    }

    /// Normalized trait matrix of record `i`.
    pub fn normalized(&self, i: usize) -> &TraitAllocation {
        &self.normalized[i]
    }

    /// `(tasks, traits)` shared by every record.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.normalized.first().map(|y| (y.tasks(), y.traits()))
    }

    /// `(y_m, r_m)` training pairs for task `m`, in file order.
    pub fn task_pairs(&self, m: usize) -> Vec<(Vec<f64>, f64)> {
        self.records
            .iter()
            .zip(&self.normalized)
            .map(|(rec, y)| (y.row(m).to_vec(), rec.rewards[m]))
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for rec in &self.records {
            let line = serde_json::to_string(rec)?;
            let _ = writeln!(out, "{line}");
        }
        Ok(out)
    }
}

/// Parses demonstration records, one JSON object per non-blank line.
pub fn parse_demonstrations(text: &str) -> Result<DemonstrationSet> {
    let records = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str::<Demonstration>(line).map_err(|e| reject(i, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    DemonstrationSet::new(records)
}

pub fn ingest_demonstrations(path: &Path) -> Result<DemonstrationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_demonstrations(&text)
}

pub fn write_demonstrations(path: &Path, demos: &DemonstrationSet) -> Result<()> {
    std::fs::write(path, demos.to_jsonl()?).map_err(|e| Error::io(path, e))
}

/// One model per task, conditioned on the demonstrations when given.
pub fn bootstrap_models(
    demos: Option<&DemonstrationSet>,
    kernel: KernelConfig,
    tasks: usize,
    traits: usize,
) -> Result<Vec<TraitRewardModel>> {
    let empty = DemonstrationSet::default();
    let demos = demos.unwrap_or(&empty);
    if let Some(shape) = demos.shape() {
        if shape != (tasks, traits) {
            return Err(Error::Dimension(format!(
                "demonstrations have shape {shape:?}, experiment needs ({tasks}, {traits})"
            )));
        }
    }
    (0..tasks)
        .map(|m| prior_from_demonstrations(&demos.task_pairs(m), kernel, traits))
        .collect()
}

/// Random demonstrations by `team` in `env`. Every robot independently
/// joins one of the tasks or stays idle, so quality varies widely. Rewards
/// carry the environment's observation noise.
pub fn generate_demonstrations(
    env: &GroundTruthEnvironment,
    team: &Team,
    count: usize,
    seed: u64,
) -> Result<DemonstrationSet> {
    let tasks = env.tasks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traits: Vec<Vec<f64>> = (0..team.species_count())
        .map(|s| team.species_traits(s).to_vec())
        .collect();
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = Assignment::zeros(tasks, team.species_count());
        for (s, &n) in team.counts().iter().enumerate() {
            for _ in 0..n {
                let bin = rng.random_range(0..=tasks);
                if bin < tasks {
                    x.set(bin, s, x.get(bin, s) + 1);
                }
            }
        }
        let y = team.normalized_allocation(&x)?;
        let eval = env.evaluate(&y, &mut rng)?;
        records.push(Demonstration {
            assignment: x,
            traits: traits.clone(),
            counts: team.counts().to_vec(),
            rewards: eval.rewards,
        });
    }
    DemonstrationSet::new(records)
}
