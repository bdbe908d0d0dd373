//! Synthetic ground-truth reward surfaces.
//!
//! Each task's trait-reward map is a nonnegative mixture of Gaussian bumps
//! over the normalized trait cube plus a constant baseline. Surfaces are
//! generated from a named, frozen [`EnvironmentPreset`] and a seed, and are
//! only ever read by the metrics layer; learners see noisy samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Assignment, Team, TraitAllocation};
use crate::solver::{assignment_space_size, species_distributions};

/// One Gaussian bump `weight · exp(−‖y − center‖² / 2 width²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub width: f64,
    pub weight: f64,
}

impl Bump {
    fn eval(&self, y: &[f64]) -> f64 {
        let d2: f64 = self.center.iter().zip(y).map(|(c, v)| (c - v) * (c - v)).sum();
        self.weight * (-d2 / (2.0 * self.width * self.width)).exp()
    }

    /// Largest value this bump takes anywhere in the box `[lo, hi]`.
    fn max_over_box(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let d2: f64 = self
            .center
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(&c, (&l, &h))| {
                let gap = if c < l {
                    l - c
                } else if c > h {
                    c - h
                } else {
                    0.0
                };
                gap * gap
            })
            .sum();
        self.weight * (-d2 / (2.0 * self.width * self.width)).exp()
    }
}

/// Ground-truth trait-reward map `f_m` of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSurface {
    pub baseline: f64,
    pub bumps: Vec<Bump>,
}

impl TaskSurface {
    pub fn value(&self, y: &[f64]) -> f64 {
        self.baseline + self.bumps.iter().map(|b| b.eval(y)).sum::<f64>()
    }

    fn upper_bound(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.baseline + self.bumps.iter().map(|b| b.max_over_box(lo, hi)).sum::<f64>()
    }
}

/// Axis-aligned range for bump centers along one trait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterRange {
    pub lo: f64,
    pub hi: f64,
}

const FULL: CenterRange = CenterRange { lo: 0.0, hi: 1.0 };

/// Recipe for generating a family of environments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentPreset {
    pub name: String,
    pub tasks: usize,
    pub traits: usize,
    pub task_names: Vec<String>,
    pub trait_names: Vec<String>,
    /// Inclusive range for the number of bumps per task.
    pub bumps_per_task: (usize, usize),
    pub width_range: (f64, f64),
    pub weight_range: (f64, f64),
    pub baseline: f64,
    pub noise_std: f64,
    /// Per task, per trait range of bump centers.
    pub center_ranges: Vec<Vec<CenterRange>>,
}

/// Name of the generic random-surface preset (3 tasks, 3 traits).
pub const RANDOM_PRESET: &str = "random-3x3-v1";
/// Name of the emergency-response preset (3 tasks, 4 traits).
pub const EMERGENCY_PRESET: &str = "emergency-response-v1";

impl EnvironmentPreset {
    /// Looks up a frozen preset by name.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            RANDOM_PRESET => Ok(Self::random_3x3()),
            EMERGENCY_PRESET => Ok(Self::emergency_response()),
            other => Err(Error::Config(format!(
                "unknown environment preset '{other}' (known: {RANDOM_PRESET}, {EMERGENCY_PRESET})"
            ))),
        }
    }

    pub fn names() -> [&'static str; 2] {
        [RANDOM_PRESET, EMERGENCY_PRESET]
    }

    fn random_3x3() -> Self {
        EnvironmentPreset {
            name: RANDOM_PRESET.into(),
            tasks: 3,
            traits: 3,
            task_names: vec!["task-1".into(), "task-2".into(), "task-3".into()],
            trait_names: vec!["trait-1".into(), "trait-2".into(), "trait-3".into()],
            bumps_per_task: (2, 5),
            width_range: (0.1, 0.4),
            weight_range: (0.5, 2.0),
            baseline: 0.1,
            noise_std: 0.05,
            center_ranges: vec![vec![FULL; 3]; 3],
        }
    }

    fn emergency_response() -> Self {
        let hi = CenterRange { lo: 0.25, hi: 0.7 };
        let lo = CenterRange { lo: 0.0, hi: 0.3 };
        EnvironmentPreset {
            name: EMERGENCY_PRESET.into(),
            tasks: 3,
            traits: 4,
            task_names: vec![
                "fire-fighting".into(),
                "debris-removal".into(),
                "coverage".into(),
            ],
            trait_names: vec![
                "speed".into(),
                "water-capacity".into(),
                "payload".into(),
                "sensing-radius".into(),
            ],
            bumps_per_task: (2, 5),
            width_range: (0.1, 0.4),
            weight_range: (0.5, 2.0),
            baseline: 0.1,
            noise_std: 0.05,
            center_ranges: vec![
                // fire fighting: speed and water
                vec![hi, hi, lo, lo],
                // debris removal: payload, some speed
                vec![CenterRange { lo: 0.1, hi: 0.4 }, lo, hi, lo],
                // coverage: sensing radius and speed
                vec![hi, lo, lo, hi],
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("preset '{}': {msg}", self.name)));
        if self.tasks == 0 || self.traits == 0 {
            return bad("needs at least one task and one trait".into());
        }
        if self.bumps_per_task.0 == 0 || self.bumps_per_task.0 > self.bumps_per_task.1 {
            return bad("invalid bump count range".into());
        }
        if !(self.width_range.0 > 0.0 && self.width_range.0 <= self.width_range.1) {
            return bad("invalid width range".into());
        }
        if !(self.weight_range.0 >= 0.0 && self.weight_range.0 <= self.weight_range.1) {
            return bad("invalid weight range".into());
        }
        if self.baseline < 0.0 || self.noise_std < 0.0 {
            return bad("baseline and noise must be nonnegative".into());
        }
        if self.center_ranges.len() != self.tasks
            || self.center_ranges.iter().any(|r| r.len() != self.traits)
        {
            return bad("center ranges must be tasks x traits".into());
        }
        Ok(())
    }
}

/// The hidden reward surfaces of all tasks plus the observation noise level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEnvironment {
    pub preset: String,
    pub seed: u64,
    pub noise_std: f64,
    pub surfaces: Vec<TaskSurface>,
}

/// Rewards returned for one deployed allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Noisy per-task rewards `r_m`.
    pub rewards: Vec<f64>,
    pub noisy_total: f64,
    /// `Σ f_m(y_m)`, for metrics only.
    pub true_total: f64,
}

/// Draws the surfaces of `preset` from `seed`.
pub fn generate_environment(preset: &EnvironmentPreset, seed: u64) -> Result<GroundTruthEnvironment> {
    preset.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surfaces = (0..preset.tasks)
        .map(|m| {
            let k = rng.random_range(preset.bumps_per_task.0..=preset.bumps_per_task.1);
            let bumps = (0..k)
                .map(|_| Bump {
                    center: preset.center_ranges[m]
                        .iter()
                        .map(|r| r.lo + (r.hi - r.lo) * rng.random::<f64>())
                        .collect(),
                    width: uniform(&mut rng, preset.width_range),
                    weight: uniform(&mut rng, preset.weight_range),
                })
                .collect();
            TaskSurface {
                baseline: preset.baseline,
                bumps,
            }
        })
        .collect();
    Ok(GroundTruthEnvironment {
        preset: preset.name.clone(),
        seed,
        noise_std: preset.noise_std,
        surfaces,
    })
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

impl GroundTruthEnvironment {
    pub fn tasks(&self) -> usize {
        self.surfaces.len()
    }

    pub fn traits(&self) -> usize {
        self.surfaces
            .first()
            .and_then(|s| s.bumps.first())
            .map_or(0, |b| b.center.len())
    }

    /// Noise-free reward of task `m` at normalized traits `y`.
    pub fn true_reward(&self, m: usize, y: &[f64]) -> f64 {
        self.surfaces[m].value(y)
    }

    /// `Σ_m f_m(y_m)`.
    pub fn true_total(&self, y: &TraitAllocation) -> f64 {
        y.rows().enumerate().map(|(m, row)| self.true_reward(m, row)).sum()
    }

    /// Samples noisy rewards for a deployed allocation.
    pub fn evaluate(&self, y: &TraitAllocation, rng: &mut impl Rng) -> Result<Evaluation> {
        if y.tasks() != self.tasks() {
            return Err(Error::Dimension(format!(
                "allocation has {} tasks, environment has {}",
                y.tasks(),
                self.tasks()
            )));
        }
        let noise = Normal::new(0.0, self.noise_std)
            .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
        let mut rewards = Vec::with_capacity(self.tasks());
        let mut true_total = 0.0;
        for (m, row) in y.rows().enumerate() {
            let f = self.true_reward(m, row);
            true_total += f;
            let eps = if self.noise_std > 0.0 {
                noise.sample(rng)
            } else {
                0.0
            };
            rewards.push(f + eps);
        }
        Ok(Evaluation {
            noisy_total: rewards.iter().sum(),
            rewards,
            true_total,
        })
    }
}

/// Best achievable total reward of a team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub total: f64,
    pub assignment: Assignment,
    /// False when the node budget ran out before the search was proven
    /// optimal; `total` is then only a lower bound on the optimum.
    pub exact: bool,
}

/// Guards the reward bound against rounding.
const BOUND_SLACK: f64 = 1e-12;

/// Default node budget for [`optimal_total_reward`].
pub const ORACLE_NODE_BUDGET: usize = 20_000_000;

/// Maximizes `Σ_m f_m(normalize(X Q)_m)` over all valid assignments by
/// depth-first branch and bound over per-species distributions. The bound
/// takes, per task, the largest value each bump reaches over the box of trait
/// vectors still reachable.
pub fn optimal_total_reward(
    env: &GroundTruthEnvironment,
    team: &Team,
    node_budget: usize,
) -> Result<Optimum> {
    if env.traits() != team.trait_count() {
        return Err(Error::Dimension(format!(
            "environment has {} traits, team has {}",
            env.traits(),
            team.trait_count()
        )));
    }
    let tasks = env.tasks();
    if assignment_space_size(team, tasks) <= 2_000 {
        return Ok(exhaustive_optimum(env, team));
    }
    let mut search = OptimumSearch::new(env, team, node_budget);
    search.descend(0, &mut vec![0.0; tasks * team.trait_count()], &mut vec![
        0;
        tasks * team.species_count()
    ]);
    let (total, x) = search.best;
    Ok(Optimum {
        total,
        assignment: Assignment::from_flat(tasks, team.species_count(), x),
        exact: !search.exhausted,
    })
}

/// Plain enumeration of every valid assignment.
pub fn exhaustive_optimum(env: &GroundTruthEnvironment, team: &Team) -> Optimum {
    let tasks = env.tasks();
    let species = team.species_count();
    let dists: Vec<Vec<Vec<u32>>> = team
        .counts()
        .iter()
        .map(|&n| species_distributions(n, tasks))
        .collect();
    let mut pick = vec![0usize; species];
    let mut best: Option<(f64, Assignment)> = None;
    loop {
        let mut x = Assignment::zeros(tasks, species);
        for s in 0..species {
            for m in 0..tasks {
                x.set(m, s, dists[s][pick[s]][m]);
            }
        }
        let y = team
            .normalized_allocation(&x)
            .expect("assignment matches team by construction");
        let total = env.true_total(&y);
        if best.as_ref().is_none_or(|(b, _)| total > *b) {
            best = Some((total, x));
        }
        let mut s = 0;
        loop {
            if s == species {
                let (total, assignment) = best.expect("at least one assignment");
                return Optimum {
                    total,
                    assignment,
                    exact: true,
                };
            }
            pick[s] += 1;
            if pick[s] < dists[s].len() {
                break;
            }
            pick[s] = 0;
            s += 1;
        }
    }
}

struct OptimumSearch<'a> {
    env: &'a GroundTruthEnvironment,
    team: &'a Team,
    tasks: usize,
    traits: usize,
    order: Vec<usize>,
    suffix: Vec<Vec<f64>>,
    dists: Vec<Vec<Vec<u32>>>,
    best: (f64, Vec<u32>),
    nodes: usize,
    budget: usize,
    exhausted: bool,
}

impl<'a> OptimumSearch<'a> {
    fn new(env: &'a GroundTruthEnvironment, team: &'a Team, budget: usize) -> Self {
        let tasks = env.tasks();
        let traits = team.trait_count();
        let species = team.species_count();
        let mut order: Vec<usize> = (0..species).collect();
        let weight = |s: usize| {
            f64::from(team.counts()[s]) * team.normalized_species_traits(s).iter().sum::<f64>()
        };
        order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));
        let mut suffix = vec![vec![0.0; traits]; species + 1];
        for k in (0..species).rev() {
            let s = order[k];
            for u in 0..traits {
                suffix[k][u] = suffix[k + 1][u]
                    + f64::from(team.counts()[s]) * team.normalized_species_traits(s)[u];
            }
        }
        let dists = order
            .iter()
            .map(|&s| species_distributions(team.counts()[s], tasks))
            .collect();
        // the idle assignment is a valid starting incumbent
        let idle = vec![0.0; traits];
        let start: f64 = (0..tasks).map(|m| env.true_reward(m, &idle)).sum();
        OptimumSearch {
            env,
            team,
            tasks,
            traits,
            order,
            suffix,
            dists,
            best: (start, vec![0; tasks * species]),
            nodes: 0,
            budget,
            exhausted: false,
        }
    }

    fn upper_bound(&self, partial: &[f64], depth: usize) -> f64 {
        let cap = &self.suffix[depth];
        let mut hi = vec![0.0; self.traits];
        (0..self.tasks)
            .map(|m| {
                let lo = &partial[m * self.traits..(m + 1) * self.traits];
                for u in 0..self.traits {
                    hi[u] = lo[u] + cap[u];
                }
                self.env.surfaces[m].upper_bound(lo, &hi)
            })
            .sum()
    }

    fn descend(&mut self, depth: usize, partial: &mut Vec<f64>, x: &mut Vec<u32>) {
        let species = self.team.species_count();
        if depth == species {
            let total: f64 = (0..self.tasks)
                .map(|m| {
                    self.env
                        .true_reward(m, &partial[m * self.traits..(m + 1) * self.traits])
                })
                .sum();
            if total > self.best.0 - 1e-9 {
                // compare in canonical summation order so r* matches what the
                // metrics layer computes for the same assignment
                let xa = Assignment::from_flat(self.tasks, species, x.clone());
                let y = self
                    .team
                    .normalized_allocation(&xa)
                    .expect("assignment matches team by construction");
                let canonical = self.env.true_total(&y);
                if canonical > self.best.0 {
                    self.best = (canonical, x.clone());
                }
            }
            return;
        }
        if self.nodes >= self.budget {
            self.exhausted = true;
            return;
        }
        let s = self.order[depth];
        let q = self.team.normalized_species_traits(s).to_vec();
        // score children first, then explore the most promising ones first
        let mut children: Vec<(f64, usize, Vec<f64>)> = Vec::new();
        for (i, dist) in self.dists[depth].iter().enumerate() {
            self.nodes += 1;
            let mut next = partial.clone();
            for (m, &n) in dist.iter().enumerate() {
                for u in 0..self.traits {
                    next[m * self.traits + u] += f64::from(n) * q[u];
                }
            }
            let ub = self.upper_bound(&next, depth + 1);
            if ub + BOUND_SLACK > self.best.0 {
                children.push((ub, i, next));
            }
        }
        children.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (ub, i, mut next) in children {
            if ub + BOUND_SLACK <= self.best.0 {
                continue;
            }
            for (m, &n) in self.dists[depth][i].iter().enumerate() {
                x[m * species + s] = n;
            }
            self.descend(depth + 1, &mut next, x);
            for m in 0..self.tasks {
                x[m * species + s] = 0;
            }
        }
    }
}
