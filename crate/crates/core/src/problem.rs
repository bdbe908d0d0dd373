//! Teams, assignments and task-trait matrices.
//!
//! A team of `S` species carries a species-trait matrix `Q` (`S x U`) and a
//! robot count per species. An [`Assignment`] `X` (`M x S`, integer) places
//! robots on `M` tasks, and the traits each task receives are the rows of
//! `Y = X Q`. Everything downstream of ingestion works with `Y` normalized by
//! the team's per-trait capacity, so a feasible allocation has every trait
//! column summing to at most one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on normalized column sums before an allocation counts as
/// over budget.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A heterogeneous robot team.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TeamSpec", into = "TeamSpec")]
pub struct Team {
    counts: Vec<u32>,
    /// Row-major `S x U`.
    traits: Vec<f64>,
    trait_count: usize,
    capacity: Vec<f64>,
    /// `traits[s][u] / capacity[u]`, row-major.
    normalized: Vec<f64>,
}

/// Serialized form of a [`Team`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeamSpec {
    pub counts: Vec<u32>,
    pub traits: Vec<Vec<f64>>,
}

impl TryFrom<TeamSpec> for Team {
    type Error = Error;

    fn try_from(spec: TeamSpec) -> Result<Self> {
        Team::new(spec.counts, spec.traits)
    }
}

impl From<Team> for TeamSpec {
    fn from(team: Team) -> Self {
        TeamSpec {
            traits: (0..team.species_count())
                .map(|s| team.species_traits(s).to_vec())
                .collect(),
            counts: team.counts,
        }
    }
}

impl Team {
    /// Builds a team from per-species robot counts and the species-trait
    /// matrix given as one row per species.
    pub fn new(counts: Vec<u32>, traits: Vec<Vec<f64>>) -> Result<Self> {
        let species = counts.len();
        if species == 0 {
            return Err(Error::InvalidTeam("team has no species".into()));
        }
        if traits.len() != species {
            return Err(Error::Dimension(format!(
                "{} species counts but {} trait rows",
                species,
                traits.len()
            )));
        }
        let trait_count = traits[0].len();
        if trait_count == 0 {
            return Err(Error::InvalidTeam("team has no traits".into()));
        }
        if let Some(row) = traits.iter().find(|r| r.len() != trait_count) {
            return Err(Error::Dimension(format!(
                "trait rows have differing lengths ({} vs {})",
                row.len(),
                trait_count
            )));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::InvalidTeam("team has no robots".into()));
        }
        let flat: Vec<f64> = traits.into_iter().flatten().collect();
        if let Some(v) = flat.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidTeam(format!(
                "trait entries must be finite and nonnegative, found {v}"
            )));
        }

        let mut capacity = vec![0.0; trait_count];
        for (s, &n) in counts.iter().enumerate() {
            for (u, cap) in capacity.iter_mut().enumerate() {
                *cap += f64::from(n) * flat[s * trait_count + u];
            }
        }
        if let Some(u) = capacity.iter().position(|&c| c <= 0.0) {
            return Err(Error::InvalidTeam(format!("trait {u} has zero capacity")));
        }

        let normalized = flat
            .iter()
            .enumerate()
            .map(|(i, v)| v / capacity[i % trait_count])
            .collect();

        Ok(Team {
            counts,
            traits: flat,
            trait_count,
            capacity,
            normalized,
        })
    }

    pub fn species_count(&self) -> usize {
        self.counts.len()
    }

    pub fn trait_count(&self) -> usize {
        self.trait_count
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total_robots(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Trait vector `q_s` of one robot of species `s`.
    pub fn species_traits(&self, s: usize) -> &[f64] {
        &self.traits[s * self.trait_count..(s + 1) * self.trait_count]
    }

    /// Trait vector of one robot of species `s`, in normalized units.
    pub fn normalized_species_traits(&self, s: usize) -> &[f64] {
        &self.normalized[s * self.trait_count..(s + 1) * self.trait_count]
    }

    /// Per-trait totals if every robot joined a single task.
    pub fn trait_capacity(&self) -> &[f64] {
        &self.capacity
    }

    /// Checks that `x` has one column per species and respects the robot
    /// counts.
    pub fn check_assignment(&self, x: &Assignment) -> Result<()> {
        if x.species() != self.species_count() {
            return Err(Error::Dimension(format!(
                "assignment has {} species columns, team has {}",
                x.species(),
                self.species_count()
            )));
        }
        for (s, &available) in self.counts.iter().enumerate() {
            let used = x.species_total(s);
            if used > available {
                return Err(Error::InvalidAssignment(format!(
                    "species {s} uses {used} robots but only {available} exist"
                )));
            }
        }
        Ok(())
    }

    /// `normalize(X Q)` in one pass.
    pub fn normalized_allocation(&self, x: &Assignment) -> Result<TraitAllocation> {
        normalize(&aggregate_traits(x, self)?, self)
    }
}

/// Integer assignment `X` of robots (by species) to tasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u32>>", into = "Vec<Vec<u32>>")]
pub struct Assignment {
    tasks: usize,
    species: usize,
    /// Row-major `M x S`.
    data: Vec<u32>,
}

impl TryFrom<Vec<Vec<u32>>> for Assignment {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self> {
        Assignment::from_rows(rows)
    }
}

impl From<Assignment> for Vec<Vec<u32>> {
    fn from(x: Assignment) -> Self {
        x.data.chunks(x.species).map(<[u32]>::to_vec).collect()
    }
}

impl Assignment {
    pub fn zeros(tasks: usize, species: usize) -> Self {
        Assignment {
            tasks,
            species,
            data: vec![0; tasks * species],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let tasks = rows.len();
        if tasks == 0 {
            return Err(Error::Dimension("assignment has no tasks".into()));
        }
        let species = rows[0].len();
        if species == 0 || rows.iter().any(|r| r.len() != species) {
            return Err(Error::Dimension(
                "assignment rows must be non-empty and equally long".into(),
            ));
        }
        Ok(Assignment {
            tasks,
            species,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub(crate) fn from_flat(tasks: usize, species: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), tasks * species);
        Assignment {
            tasks,
            species,
            data,
        }
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn get(&self, m: usize, s: usize) -> u32 {
        self.data[m * self.species + s]
    }

    pub fn set(&mut self, m: usize, s: usize, value: u32) {
        self.data[m * self.species + s] = value;
    }

    /// Robots of species `s` deployed across all tasks.
    pub fn species_total(&self, s: usize) -> u32 {
        (0..self.tasks).map(|m| self.get(m, s)).sum()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }
}

/// Task-trait matrix `Y` (`M x U`), row `m` holding the traits given to task
/// `m`. Normalized unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TraitAllocation {
    tasks: usize,
    traits: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TraitAllocation {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TraitAllocation::from_rows(rows)
    }
}

impl From<TraitAllocation> for Vec<Vec<f64>> {
    fn from(y: TraitAllocation) -> Self {
        y.data.chunks(y.traits).map(<[f64]>::to_vec).collect()
    }
}

impl TraitAllocation {
    pub fn zeros(tasks: usize, traits: usize) -> Self {
        TraitAllocation {
            tasks,
            traits,
            data: vec![0.0; tasks * traits],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let tasks = rows.len();
        if tasks == 0 {
            return Err(Error::Dimension("allocation has no tasks".into()));
        }
        let traits = rows[0].len();
        if traits == 0 || rows.iter().any(|r| r.len() != traits) {
            return Err(Error::Dimension(
                "allocation rows must be non-empty and equally long".into(),
            ));
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidValue(format!(
                "allocation entries must be finite and nonnegative, found {v}"
            )));
        }
        Ok(TraitAllocation {
            tasks,
            traits,
            data,
        })
    }

    pub fn from_flat(tasks: usize, traits: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), tasks * traits, "flat allocation has wrong length");
        TraitAllocation {
            tasks,
            traits,
            data,
        }
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn traits(&self) -> usize {
        self.traits
    }

    pub fn get(&self, m: usize, u: usize) -> f64 {
        self.data[m * self.traits + u]
    }

    pub fn set(&mut self, m: usize, u: usize, value: f64) {
        self.data[m * self.traits + u] = value;
    }

    /// Trait vector `y_m` given to task `m`.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.traits..(m + 1) * self.traits]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.traits)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column_sum(&self, u: usize) -> f64 {
        (0..self.tasks).map(|m| self.get(m, u)).sum()
    }

    /// Squared Frobenius distance to `other`.
    pub fn squared_distance(&self, other: &TraitAllocation) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Shrinks every trait column whose sum exceeds one uniformly back onto
    /// the budget.
    pub fn scale_to_budget(&mut self) {
        for u in 0..self.traits {
            let sum = self.column_sum(u);
            if sum > 1.0 {
                for m in 0..self.tasks {
                    let v = self.get(m, u) / sum;
                    self.set(m, u, v);
                }
            }
        }
    }
}

/// Raw task-trait matrix `X Q`.
pub fn aggregate_traits(x: &Assignment, team: &Team) -> Result<TraitAllocation> {
    if x.species() != team.species_count() {
        return Err(Error::Dimension(format!(
            "assignment has {} species columns, team has {}",
            x.species(),
            team.species_count()
        )));
    }
    let traits = team.trait_count();
    let mut y = TraitAllocation::zeros(x.tasks(), traits);
    for m in 0..x.tasks() {
        for s in 0..x.species() {
            let n = x.get(m, s);
            if n == 0 {
                continue;
            }
            let q = team.species_traits(s);
            for (u, qu) in q.iter().enumerate() {
                y.data[m * traits + u] += f64::from(n) * qu;
            }
        }
    }
    Ok(y)
}

/// Per-trait capacity of the team.
pub fn trait_capacity(team: &Team) -> Vec<f64> {
    team.trait_capacity().to_vec()
}

/// Divides each trait column of a raw allocation by the team's capacity.
pub fn normalize(raw: &TraitAllocation, team: &Team) -> Result<TraitAllocation> {
    rescale(raw, team, |v, cap| v / cap)
}

/// Inverse of [`normalize`].
pub fn denormalize(y: &TraitAllocation, team: &Team) -> Result<TraitAllocation> {
    rescale(y, team, |v, cap| v * cap)
}

fn rescale(
    y: &TraitAllocation,
    team: &Team,
    op: impl Fn(f64, f64) -> f64,
) -> Result<TraitAllocation> {
    if y.traits() != team.trait_count() {
        return Err(Error::Dimension(format!(
            "allocation has {} traits, team has {}",
            y.traits(),
            team.trait_count()
        )));
    }
    let cap = team.trait_capacity();
    let data = y
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &v)| op(v, cap[i % y.traits()]))
        .collect();
    Ok(TraitAllocation::from_flat(y.tasks(), y.traits(), data))
}

/// True when every normalized trait column sums to at most one (within
/// [`FEASIBILITY_TOL`]).
pub fn is_feasible_target(y: &TraitAllocation) -> bool {
    (0..y.traits()).all(|u| y.column_sum(u) <= 1.0 + FEASIBILITY_TOL)
}
