//! Concurrent multi-task adaptive bandit selection.
//!
//! The normalized trait space of every task is discretized into a coarse grid,
//! and every feasible combination of one grid point per task is a candidate
//! task-trait matrix. Each iteration, every candidate gets a confidence radius
//! that shrinks with the number of times it was chosen, a fresh set of
//! feasible neighbors inside that radius, and a UCB utility averaged over the
//! neighbors. The winning candidate's best neighbor becomes the target that is
//! handed to the allocation solver.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::TraitRewardModel;
use crate::problem::{is_feasible_target, Team, TraitAllocation};
use crate::solver::{solve_allocation_with, SolveResult, SolverOptions};

const NEIGHBOR_ATTEMPTS: usize = 50;

/// Exploration weight schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSchedule {
    /// `sqrt(2 ln(|candidates| i² π² / 6δ))`.
    GpUcb { delta: f64 },
    Constant { value: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::GpUcb { delta: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmtabConfig {
    /// Grid points per trait dimension (`d`).
    pub grid_resolution: usize,
    /// Neighbors averaged per candidate (`N_f`), the candidate included.
    pub neighborhood_size: usize,
    pub beta: BetaSchedule,
    pub rng_seed: u64,
}

impl Default for CmtabConfig {
    fn default() -> Self {
        CmtabConfig {
            grid_resolution: 5,
            neighborhood_size: 10,
            beta: BetaSchedule::default(),
            rng_seed: 0,
        }
    }
}

impl CmtabConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 2 {
            return Err(Error::Config(format!(
                "grid resolution must be at least 2, got {}",
                self.grid_resolution
            )));
        }
        if self.neighborhood_size == 0 {
            return Err(Error::Config("neighborhood size must be at least 1".into()));
        }
        match self.beta {
            BetaSchedule::GpUcb { delta } if !(delta > 0.0 && delta < 1.0) => Err(Error::Config(
                format!("beta delta must lie in (0, 1), got {delta}"),
            )),
            BetaSchedule::Constant { value } if !(value >= 0.0 && value.is_finite()) => Err(
                Error::Config(format!("constant beta must be nonnegative, got {value}")),
            ),
            _ => Ok(()),
        }
    }

    /// Trait-space half-width per unit of confidence radius. A never-sampled
    /// candidate (radius `sqrt(2 ln N)`) perturbs each entry by at most half a
    /// grid cell.
    pub fn neighborhood_scale(&self, horizon: usize) -> f64 {
        let fresh = confidence_radius(0, horizon);
        1.0 / (2.0 * (self.grid_resolution - 1) as f64 * fresh)
    }
}

/// Coarse candidates with their sample counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    tasks: usize,
    traits: usize,
    horizon: usize,
    candidates: Vec<TraitAllocation>,
    counts: Vec<u64>,
}

impl CandidateSet {
    pub fn new(candidates: Vec<TraitAllocation>, horizon: usize) -> Result<Self> {
        let first = candidates
            .first()
            .ok_or_else(|| Error::Config("candidate set is empty".into()))?;
        let (tasks, traits) = (first.tasks(), first.traits());
        if candidates
            .iter()
            .any(|c| c.tasks() != tasks || c.traits() != traits)
        {
            return Err(Error::Dimension("candidates differ in shape".into()));
        }
        if let Some(c) = candidates.iter().find(|c| !is_feasible_target(c)) {
            return Err(Error::InvalidValue(format!("infeasible candidate {c:?}")));
        }
        if horizon < 2 {
            return Err(Error::Config(format!("horizon must be at least 2, got {horizon}")));
        }
        Ok(CandidateSet {
            tasks,
            traits,
            horizon,
            counts: vec![0; candidates.len()],
            candidates,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn traits(&self) -> usize {
        self.traits
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn candidate(&self, idx: usize) -> &TraitAllocation {
        &self.candidates[idx]
    }

    pub fn candidates(&self) -> &[TraitAllocation] {
        &self.candidates
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of completed selections.
    pub fn total_samples(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Current confidence radius of candidate `idx`.
    pub fn radius(&self, idx: usize) -> f64 {
        confidence_radius(self.counts[idx], self.horizon)
    }

    pub fn record_sample(&mut self, idx: usize) {
        self.counts[idx] += 1;
    }
}

/// Grid `{0, 1/(d-1), ..., 1}` per trait, combined into every `tasks x traits`
/// matrix whose trait columns sum to at most one. Matrices are ordered
/// lexicographically by their row-major grid levels.
pub fn grid_candidates(tasks: usize, traits: usize, resolution: usize) -> Vec<TraitAllocation> {
    assert!(resolution >= 2 && tasks > 0 && traits > 0);
    let top = resolution - 1;
    let entries = tasks * traits;
    let step = 1.0 / top as f64;
    let mut levels = vec![0usize; entries];
    let mut col_sum = vec![0usize; traits];
    let mut out = Vec::new();

    // depth-first over entries in row-major order, pruning over-budget columns
    fn rec(
        pos: usize,
        entries: usize,
        traits: usize,
        top: usize,
        step: f64,
        levels: &mut [usize],
        col_sum: &mut [usize],
        out: &mut Vec<TraitAllocation>,
        tasks: usize,
    ) {
        if pos == entries {
            let data = levels.iter().map(|&l| l as f64 * step).collect();
            out.push(TraitAllocation::from_flat(tasks, traits, data));
            return;
        }
        let u = pos % traits;
        for l in 0..=top - col_sum[u] {
            levels[pos] = l;
            col_sum[u] += l;
            rec(pos + 1, entries, traits, top, step, levels, col_sum, out, tasks);
            col_sum[u] -= l;
        }
    }
    rec(
        0,
        entries,
        traits,
        top,
        step,
        &mut levels,
        &mut col_sum,
        &mut out,
        tasks,
    );
    out
}

/// Builds the fixed candidate set for `tasks` tasks over the team's traits.
pub fn build_candidate_set(
    team: &Team,
    tasks: usize,
    horizon: usize,
    cfg: &CmtabConfig,
) -> Result<CandidateSet> {
    cfg.validate()?;
    if tasks == 0 {
        return Err(Error::Config("at least one task is required".into()));
    }
    CandidateSet::new(
        grid_candidates(tasks, team.trait_count(), cfg.grid_resolution),
        horizon,
    )
}

/// `sqrt(2 ln N / (S + 1))` with the natural log.
pub fn confidence_radius(samples: u64, horizon: usize) -> f64 {
    (2.0 * (horizon as f64).ln() / (samples as f64 + 1.0)).sqrt()
}

/// Exploration weight for iteration `i` (1-based).
pub fn beta(i: usize, cfg: &CmtabConfig, candidate_count: usize) -> f64 {
    match cfg.beta {
        BetaSchedule::Constant { value } => value,
        BetaSchedule::GpUcb { delta } => {
            let i = i.max(1) as f64;
            let pi2 = std::f64::consts::PI * std::f64::consts::PI;
            let arg = candidate_count.max(1) as f64 * i * i * pi2 / (6.0 * delta);
            (2.0 * arg.ln()).max(0.0).sqrt()
        }
    }
}

/// `count` feasible matrices around `center`, the first being `center`
/// itself. Every other entry is perturbed uniformly by at most `half_width`
/// and clamped to `[0, 1]`; infeasible draws are retried, and after
/// repeated failures the last draw is scaled back onto the trait budget.
pub fn sample_neighborhood(
    center: &TraitAllocation,
    half_width: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<TraitAllocation> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(center.clone());
    if half_width <= 0.0 {
        out.resize(count, center.clone());
        return out;
    }
    for _ in 1..count {
        let mut draw = center.clone();
        let mut accepted = false;
        for _ in 0..NEIGHBOR_ATTEMPTS {
            for (v, c) in draw.as_mut_slice().iter_mut().zip(center.as_slice()) {
                let delta = rng.random_range(-half_width..=half_width);
                *v = (c + delta).clamp(0.0, 1.0);
            }
            if is_feasible_target(&draw) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            draw.scale_to_budget();
        }
        out.push(draw);
    }
    out
}

/// Per-point UCB value `Σ_m μ_m(y_m) + β σ_m(y_m)` for many points at once.
/// `points` are `tasks x traits` matrices; model `m` scores row `m`.
pub fn point_utilities(
    models: &[TraitRewardModel],
    points: &[&TraitAllocation],
    beta: f64,
) -> Vec<f64> {
    if points.is_empty() {
        return Vec::new();
    }
    let per_task: Vec<Vec<f64>> = models
        .par_iter()
        .enumerate()
        .map(|(m, model)| {
            let rows: Vec<f64> = points.iter().flat_map(|p| p.row(m).iter().copied()).collect();
            let (means, vars) = model.predict_many(&rows);
            means
                .iter()
                .zip(&vars)
                .map(|(mu, var)| mu + beta * var.sqrt())
                .collect()
        })
        .collect();
    (0..points.len())
        .map(|j| per_task.iter().map(|t| t[j]).sum())
        .collect()
}

/// Neighborhood-averaged UCB utility `ζ`.
pub fn estimated_utility(
    models: &[TraitRewardModel],
    neighborhood: &[TraitAllocation],
    beta: f64,
) -> f64 {
    assert!(!neighborhood.is_empty(), "neighborhood must not be empty");
    let refs: Vec<&TraitAllocation> = neighborhood.iter().collect();
    let values = point_utilities(models, &refs, beta);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Index maximizing `ζ + M γ`, lowest index on ties.
pub fn ucb_argmax(utilities: &[f64], radii: &[f64], tasks: usize) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (z, g)) in utilities.iter().zip(radii).enumerate() {
        let score = z + tasks as f64 * g;
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// Outcome of one candidate scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Winning coarse candidate.
    pub index: usize,
    /// Chosen point in the winner's neighborhood.
    pub target: TraitAllocation,
    /// `ζ` of the winner.
    pub utility: f64,
    pub radius: f64,
}

/// Scans all candidates, picks the UCB winner, and returns its best neighbor.
/// `neighbors` produces the neighborhood of a candidate given its
/// confidence radius.
pub(crate) fn scan_candidates(
    state: &CandidateSet,
    models: &[TraitRewardModel],
    beta: f64,
    mut neighbors: impl FnMut(&TraitAllocation, f64) -> Vec<TraitAllocation>,
) -> Selection {
    assert_eq!(models.len(), state.tasks(), "one model per task required");
    let radii: Vec<f64> = (0..state.len()).map(|i| state.radius(i)).collect();
    let neighborhoods: Vec<Vec<TraitAllocation>> = state
        .candidates()
        .iter()
        .zip(&radii)
        .map(|(c, &r)| neighbors(c, r))
        .collect();

    let points: Vec<&TraitAllocation> = neighborhoods.iter().flatten().collect();
    let values = point_utilities(models, &points, beta);

    let mut utilities = Vec::with_capacity(state.len());
    let mut offset = 0;
    for hood in &neighborhoods {
        let slice = &values[offset..offset + hood.len()];
        utilities.push(slice.iter().sum::<f64>() / slice.len() as f64);
        offset += hood.len();
    }
    let index = ucb_argmax(&utilities, &radii, state.tasks());

    let start: usize = neighborhoods[..index].iter().map(Vec::len).sum();
    let winner = &values[start..start + neighborhoods[index].len()];
    let mut pick = 0;
    for (j, v) in winner.iter().enumerate() {
        if *v > winner[pick] {
            pick = j;
        }
    }
    Selection {
        index,
        target: neighborhoods[index][pick].clone(),
        utility: utilities[index],
        radius: radii[index],
    }
}

/// One CMTAB selection at iteration `i` (1-based).
pub fn select_target(
    state: &CandidateSet,
    models: &[TraitRewardModel],
    cfg: &CmtabConfig,
    i: usize,
    rng: &mut impl Rng,
) -> Selection {
    let b = beta(i, cfg, state.len());
    let scale = cfg.neighborhood_scale(state.horizon());
    scan_candidates(state, models, b, |c, r| {
        sample_neighborhood(c, r * scale, cfg.neighborhood_size, rng)
    })
}

/// Result of one full CMTAB iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub selection: Selection,
    pub solve: SolveResult,
    /// `normalize(X Q)` of the deployed assignment.
    pub achieved: TraitAllocation,
}

/// Select, solve for a deployable assignment, and record the sample.
pub fn step(
    models: &[TraitRewardModel],
    state: &mut CandidateSet,
    cfg: &CmtabConfig,
    i: usize,
    team: &Team,
    rng: &mut impl Rng,
    solver: &SolverOptions,
) -> Result<StepOutcome> {
    let selection = select_target(state, models, cfg, i, rng);
    let solve = solve_allocation_with(&selection.target, team, solver)?;
    state.record_sample(selection.index);
    let achieved = team.normalized_allocation(&solve.assignment)?;
    Ok(StepOutcome {
        selection,
        solve,
        achieved,
    })
}
