//! Runs every (team, strategy, round) combination of an experiment.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TeamSource};
use super::demos::{bootstrap_models, ingest_demonstrations};
use super::metrics::{compute_bur, compute_cmr, normalize_series};
use super::seeds::{derive_seed, SeedTag};
use super::summary::{summarize, RunDigest, Summary};
use super::teams::generate_random_team;
use crate::baselines::{Strategy, StrategyKind};
use crate::environment::{generate_environment, optimal_total_reward, GroundTruthEnvironment, Optimum};
use crate::error::{Error, Result};
use crate::gp::TraitRewardModel;
use crate::problem::{Assignment, Team, TraitAllocation};
use crate::solver::{solve_allocation_with, SolvePhase};

/// An online team with its best achievable total reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamContext {
    pub index: usize,
    pub team: Team,
    pub optimum: Optimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub team: usize,
    pub strategy: StrategyKind,
    pub round: usize,
}

impl RunKey {
    /// File stem for this run's outputs.
    pub fn stem(&self) -> String {
        format!("team{:02}_{}_round{:02}", self.team, self.strategy, self.round)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub target: TraitAllocation,
    pub assignment: Assignment,
    pub achieved: TraitAllocation,
    pub phase: SolvePhase,
    pub residual: f64,
    pub rewards: Vec<f64>,
    pub noisy_total: f64,
    pub true_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub key: RunKey,
    pub noise_seed: u64,
    pub strategy_seed: u64,
    pub optimum: f64,
    pub optimum_exact: bool,
    pub records: Vec<IterationRecord>,
    pub bur: Vec<f64>,
    pub bur_normalized: Vec<f64>,
    pub cmr: Vec<f64>,
}

impl RunLog {
    pub fn true_totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.true_total).collect()
    }

    pub(crate) fn digest(&self) -> RunDigest {
        RunDigest {
            key: self.key,
            optimum: self.optimum,
            optimum_exact: self.optimum_exact,
            bur_normalized: self.bur_normalized.clone(),
            cmr: self.cmr.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub key: RunKey,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub environment: GroundTruthEnvironment,
    pub teams: Vec<TeamContext>,
    pub runs: Vec<RunLog>,
    pub failures: Vec<RunFailure>,
    pub summary: Summary,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Environment and online teams described by `cfg`.
pub fn build_environment_and_teams(
    cfg: &ExperimentConfig,
) -> Result<(GroundTruthEnvironment, Vec<Team>)> {
    let preset = cfg.preset()?;
    let env_seed = cfg
        .environment
        .seed
        .unwrap_or_else(|| derive_seed(cfg.master_seed, SeedTag::Environment, &[]));
    let env = generate_environment(&preset, env_seed)?;
    let teams = match &cfg.teams {
        TeamSource::Random {
            count,
            species,
            count_range,
        } => (0..*count)
            .map(|t| {
                let seed = derive_seed(cfg.master_seed, SeedTag::Team, &[t as u64]);
                generate_random_team(*species, preset.traits, *count_range, seed)
            })
            .collect::<Result<Vec<_>>>()?,
        TeamSource::Explicit { members } => members.clone(),
    };
    Ok((env, teams))
}

/// Optimal total reward of every team, in team order.
pub fn team_optima(
    cfg: &ExperimentConfig,
    env: &GroundTruthEnvironment,
    teams: &[Team],
) -> Result<Vec<TeamContext>> {
    build_pool(cfg.workers)?.install(|| {
        teams
            .par_iter()
            .enumerate()
            .map(|(index, team)| {
                Ok(TeamContext {
                    index,
                    team: team.clone(),
                    optimum: optimal_total_reward(env, team, cfg.oracle_node_budget)?,
                })
            })
            .collect()
    })
}

fn run_single(
    cfg: &ExperimentConfig,
    env: &GroundTruthEnvironment,
    ctx: &TeamContext,
    key: RunKey,
    initial_models: &[TraitRewardModel],
) -> Result<RunLog> {
    let team = &ctx.team;
    let tasks = env.tasks();
    let noise_seed = derive_seed(
        cfg.master_seed,
        SeedTag::Noise,
        &[key.team as u64, key.round as u64],
    );
    let strategy_seed = derive_seed(
        cfg.master_seed,
        SeedTag::Strategy,
        &[key.team as u64, key.round as u64, cfg.cmtab.rng_seed],
    );
    let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut strategy_rng = ChaCha8Rng::seed_from_u64(strategy_seed);
    let mut strategy = Strategy::new(key.strategy, team, tasks, cfg.iterations, &cfg.cmtab)?;
    let mut models = initial_models.to_vec();

    let mut records = Vec::with_capacity(cfg.iterations);
    for i in 1..=cfg.iterations {
        let proposal = strategy.propose(&models, &cfg.cmtab, i, &mut strategy_rng);
        let solve = solve_allocation_with(&proposal.target, team, &cfg.solver)?;
        strategy.record(&proposal);
        team.check_assignment(&solve.assignment)?;
        let achieved = team.normalized_allocation(&solve.assignment)?;
        let eval = env.evaluate(&achieved, &mut noise_rng)?;
        if strategy.uses_models() {
            for (m, model) in models.iter_mut().enumerate() {
                model.observe(achieved.row(m), eval.rewards[m])?;
            }
        }
        records.push(IterationRecord {
            iteration: i,
            target: proposal.target,
            assignment: solve.assignment,
            achieved,
            phase: solve.phase,
            residual: solve.residual,
            rewards: eval.rewards,
            noisy_total: eval.noisy_total,
            true_total: eval.true_total,
        });
    }

    let totals: Vec<f64> = records.iter().map(|r| r.true_total).collect();
    let bur = compute_bur(&totals);
    let optimum = ctx.optimum.total;
    Ok(RunLog {
        key,
        noise_seed,
        strategy_seed,
        optimum,
        optimum_exact: ctx.optimum.exact,
        bur_normalized: normalize_series(&bur, optimum),
        cmr: compute_cmr(&totals, optimum),
        bur,
        records,
    })
}

/// Runs the experiment in memory. Errors in setup are returned; errors in an
/// individual run are collected as failures while other runs proceed.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (env, teams) = build_environment_and_teams(cfg)?;
    let demos = cfg
        .demonstrations
        .as_deref()
        .map(ingest_demonstrations)
        .transpose()?;
    let initial_models = bootstrap_models(demos.as_ref(), cfg.kernel, env.tasks(), env.traits())?;
    let contexts = team_optima(cfg, &env, &teams)?;

    let mut keys = Vec::new();
    for team in 0..contexts.len() {
        for &strategy in &cfg.strategies {
            for round in 0..cfg.rounds {
                keys.push(RunKey {
                    team,
                    strategy,
                    round,
                });
            }
        }
    }
    let results: Vec<std::result::Result<RunLog, RunFailure>> =
        build_pool(cfg.workers)?.install(|| {
            keys.par_iter()
                .map(|&key| {
                    run_single(cfg, &env, &contexts[key.team], key, &initial_models).map_err(|e| {
                        RunFailure {
                            key,
                            error: e.to_string(),
                        }
                    })
                })
                .collect()
        });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(log) => runs.push(log),
            Err(f) => failures.push(f),
        }
    }
    let digests: Vec<RunDigest> = runs.iter().map(RunLog::digest).collect();
    let summary = summarize(&digests, cfg.iterations);
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        environment: env,
        teams: contexts,
        runs,
        failures,
        summary,
    })
}

#[derive(Serialize)]
struct CsvRow {
    iteration: usize,
    true_total: f64,
    noisy_total: f64,
    bur: f64,
    bur_normalized: f64,
    cmr: f64,
    phase: SolvePhase,
    residual: f64,
    target: String,
    assignment: String,
    achieved: String,
    rewards: String,
}

/// Per-iteration CSV of one run.
pub fn run_csv(log: &RunLog) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (k, rec) in log.records.iter().enumerate() {
        w.serialize(CsvRow {
            iteration: rec.iteration,
            true_total: rec.true_total,
            noisy_total: rec.noisy_total,
            bur: log.bur[k],
            bur_normalized: log.bur_normalized[k],
            cmr: log.cmr[k],
            phase: rec.phase,
            residual: rec.residual,
            target: serde_json::to_string(&rec.target)?,
            assignment: serde_json::to_string(&rec.assignment)?,
            achieved: serde_json::to_string(&rec.achieved)?,
            rewards: serde_json::to_string(&rec.rewards)?,
        })?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

#[derive(Serialize)]
struct Manifest<'a> {
    key: RunKey,
    csv: String,
    config: &'a ExperimentConfig,
    environment: &'a GroundTruthEnvironment,
    team: &'a Team,
    optimum: &'a Optimum,
    noise_seed: u64,
    strategy_seed: u64,
    iterations: usize,
    final_bur: f64,
    final_bur_normalized: f64,
    final_cmr: f64,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes run CSVs and manifests under `dir/runs`, plus the summary files.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    let runs_dir = dir.join("runs");
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    for log in &outcome.runs {
        let stem = log.key.stem();
        let csv_name = format!("{stem}.csv");
        write_file(&runs_dir.join(&csv_name), &run_csv(log)?)?;
        let ctx = &outcome.teams[log.key.team];
        let last = log.records.len() - 1;
        let manifest = Manifest {
            key: log.key,
            csv: csv_name,
            config: &outcome.config,
            environment: &outcome.environment,
            team: &ctx.team,
            optimum: &ctx.optimum,
            noise_seed: log.noise_seed,
            strategy_seed: log.strategy_seed,
            iterations: log.records.len(),
            final_bur: log.bur[last],
            final_bur_normalized: log.bur_normalized[last],
            final_cmr: log.cmr[last],
        };
        write_file(&runs_dir.join(format!("{stem}.json")), &json_bytes(&manifest)?)?;
    }
    write_file(&dir.join("teams.json"), &json_bytes(&outcome.teams)?)?;
    write_file(&dir.join("failures.json"), &json_bytes(&outcome.failures)?)?;
    outcome.summary.write(dir)
}

/// Runs the experiment and writes every output under the configured
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let outcome = execute(cfg)?;
    write_outputs(&outcome, &cfg.output_dir)?;
    Ok(outcome)
}
