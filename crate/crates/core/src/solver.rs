//! Integer allocation of robots to a target task-trait matrix.
//!
//! Given a normalized target `Y`, find the assignment `X` minimizing
//! `‖X Q̃ − Y‖_F` (with `Q̃` the normalized species-trait matrix) subject to the
//! species counts. The strict phase additionally requires `X Q̃ ⪰ Y`; only if
//! no assignment meets that does the fallback phase drop it.
//!
//! Both phases run a best-first branch and bound that commits one species at
//! a time to a distribution over the tasks (robots left over stay idle). The
//! lower bound relaxes the remaining species to a continuous, per-trait
//! budget: each trait column can still receive at most the remaining
//! capacity, spread over tasks however helps most.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Assignment, Team, TraitAllocation, FEASIBILITY_TOL};

/// Squared residuals closer than this are treated as equal, with the
/// lexicographically smaller assignment winning.
const TIE_EPS: f64 = 1e-12;

/// Which constraint set produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePhase {
    /// `X Q̃ ⪰ Y` held.
    Strict,
    /// No assignment covered the target; closest assignment returned.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub assignment: Assignment,
    /// `‖X Q̃ − Y‖_F` in normalized units.
    pub residual: f64,
    pub phase: SolvePhase,
    /// Set when the node budget ran out and the best incumbent was returned.
    #[serde(default)]
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Maximum number of search nodes generated per phase.
    pub node_budget: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            node_budget: 1_000_000,
        }
    }
}

/// Two-phase allocation with default options.
pub fn solve_allocation(target: &TraitAllocation, team: &Team) -> Result<SolveResult> {
    solve_allocation_with(target, team, &SolverOptions::default())
}

pub fn solve_allocation_with(
    target: &TraitAllocation,
    team: &Team,
    options: &SolverOptions,
) -> Result<SolveResult> {
    check_target(target, team)?;
    let search = Search::new(target, team, options.node_budget);

    let strict = search.run(true);
    if let Some(best) = strict.best {
        return Ok(search.finish(best.x, SolvePhase::Strict, strict.exhausted));
    }
    let fallback = search.run(false);
    let best = fallback
        .best
        .expect("the empty assignment is always admissible in the fallback phase");
    Ok(search.finish(
        best.x,
        SolvePhase::Fallback,
        strict.exhausted || fallback.exhausted,
    ))
}

/// Brute-force reference: enumerates every valid assignment and applies the
/// same preference (any strict solution beats every fallback one; then lowest
/// residual; then lexicographically smallest `X`). Refuses instances with more
/// than `limit` assignments.
pub fn exhaustive_oracle(
    target: &TraitAllocation,
    team: &Team,
    limit: u128,
) -> Result<SolveResult> {
    check_target(target, team)?;
    let tasks = target.tasks();
    let traits = target.traits();
    let species = team.species_count();
    let needed = assignment_space_size(team, tasks);
    if needed > limit {
        return Err(Error::EnumerationBudget { needed, limit });
    }
    let dists: Vec<Vec<Vec<u32>>> = team
        .counts()
        .iter()
        .map(|&n| species_distributions(n, tasks))
        .collect();

    let mut pick = vec![0usize; species];
    // (strict, squared residual, x)
    let mut best: Option<(bool, f64, Vec<u32>)> = None;
    loop {
        let mut x = vec![0u32; tasks * species];
        for s in 0..species {
            for m in 0..tasks {
                x[m * species + s] = dists[s][pick[s]][m];
            }
        }
        let mut strict = true;
        let mut sq = 0.0;
        for m in 0..tasks {
            for u in 0..traits {
                let mut v = 0.0;
                for s in 0..species {
                    v += f64::from(x[m * species + s]) * team.normalized_species_traits(s)[u];
                }
                let y = target.get(m, u);
                if v < y - FEASIBILITY_TOL {
                    strict = false;
                }
                sq += (v - y) * (v - y);
            }
        }
        let better = match &best {
            None => true,
            Some((bs, bsq, bx)) => {
                if strict != *bs {
                    strict
                } else if (sq - bsq).abs() <= TIE_EPS {
                    x < *bx
                } else {
                    sq < *bsq
                }
            }
        };
        if better {
            best = Some((strict, sq, x));
        }

        // odometer over species distributions
        let mut s = 0;
        loop {
            if s == species {
                let (strict, _, x) = best.expect("at least one assignment enumerated");
                let assignment = Assignment::from_flat(tasks, species, x);
                let residual = frobenius_residual(&assignment, team, target);
                return Ok(SolveResult {
                    assignment,
                    residual,
                    phase: if strict {
                        SolvePhase::Strict
                    } else {
                        SolvePhase::Fallback
                    },
                    budget_exhausted: false,
                });
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

/// Number of valid assignments of `team` to `tasks` tasks:
/// `Π_s C(N_s + M, M)`.
pub fn assignment_space_size(team: &Team, tasks: usize) -> u128 {
    team.counts()
        .iter()
        .map(|&n| binomial(u128::from(n) + tasks as u128, tasks as u128))
        .product()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

/// All ways to place up to `count` robots on `tasks` tasks (the remainder
/// idles), in lexicographic order.
pub(crate) fn species_distributions(count: u32, tasks: usize) -> Vec<Vec<u32>> {
    fn rec(left: u32, prefix: &mut Vec<u32>, tasks: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == tasks {
            out.push(prefix.clone());
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(left - v, prefix, tasks, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(count, &mut Vec::with_capacity(tasks), tasks, &mut out);
    out
}

/// `‖normalize(X Q) − Y‖_F`.
pub fn frobenius_residual(x: &Assignment, team: &Team, target: &TraitAllocation) -> f64 {
    let mut sq = 0.0;
    for m in 0..target.tasks() {
        for u in 0..target.traits() {
            let mut v = 0.0;
            for s in 0..team.species_count() {
                v += f64::from(x.get(m, s)) * team.normalized_species_traits(s)[u];
            }
            let d = v - target.get(m, u);
            sq += d * d;
        }
    }
    sq.sqrt()
}

fn check_target(target: &TraitAllocation, team: &Team) -> Result<()> {
    if target.traits() != team.trait_count() {
        return Err(Error::Dimension(format!(
            "target has {} traits, team has {}",
            target.traits(),
            team.trait_count()
        )));
    }
    Ok(())
}

/// Minimum of `Σ_m (d_m − a_m)²` over `a ≥ 0`, `Σ a ≤ capacity`: pour the
/// capacity into the largest deficits until they level off.
fn waterfill(deficits: &mut [f64], capacity: f64) -> f64 {
    let total: f64 = deficits.iter().sum();
    if total <= capacity {
        return 0.0;
    }
    deficits.sort_by(|a, b| b.total_cmp(a));
    // find k such that the level t = (Σ_{i<k} d_i − C) / k lies in [d_k, d_{k-1}]
    let mut prefix = 0.0;
    let mut level = 0.0;
    for k in 0..deficits.len() {
        prefix += deficits[k];
        level = (prefix - capacity) / (k + 1) as f64;
        let next = deficits.get(k + 1).copied().unwrap_or(0.0);
        if level >= next {
            break;
        }
    }
    let level = level.max(0.0);
    deficits.iter().map(|&d| d.min(level).powi(2)).sum()
}

struct Search<'a> {
    target: &'a TraitAllocation,
    team: &'a Team,
    tasks: usize,
    traits: usize,
    species: usize,
    /// Species in branching order.
    order: Vec<usize>,
    /// `suffix[k][u]`: capacity of trait `u` left after committing `order[..k]`.
    suffix: Vec<Vec<f64>>,
    dists: Vec<Vec<Vec<u32>>>,
    /// `relax[k]`: per-task relaxation over the species left after
    /// committing `order[..k]`.
    relax: Vec<Option<TaskRelaxation>>,
    budget: usize,
}

/// Largest number of free species for which the per-task relaxation is
/// solved (its cost grows as `3^k`).
const RELAX_MAX_SPECIES: usize = 4;

/// Closest approach of one task's row to its target when the remaining
/// species may each send anywhere between zero and all of their robots to
/// that task alone. Solved exactly by enumerating which variables sit at
/// zero, at their upper bound, or strictly between.
struct TaskRelaxation {
    /// Normalized trait vectors of the remaining species.
    cols: Vec<Vec<f64>>,
    upper: Vec<f64>,
    /// Inverse Gram matrix of every subset of columns (by bit mask), or
    /// `None` when the subset is linearly dependent.
    gram_inv: Vec<Option<Vec<f64>>>,
}

impl TaskRelaxation {
    fn new(cols: Vec<Vec<f64>>, upper: Vec<f64>) -> Self {
        let k = cols.len();
        let gram_inv = (0..1usize << k)
            .map(|mask| {
                let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
                let n = idx.len();
                let mut g = vec![0.0; n * n];
                for (a, &i) in idx.iter().enumerate() {
                    for (b, &j) in idx.iter().enumerate() {
                        g[a * n + b] = cols[i].iter().zip(&cols[j]).map(|(x, y)| x * y).sum();
                    }
                }
                invert_small(&mut g, n)
            })
            .collect();
        TaskRelaxation {
            cols,
            upper,
            gram_inv,
        }
    }

    /// `min ‖gap − Σ_i x_i col_i‖²` over `0 ≤ x ≤ upper`.
    fn min_sq(&self, gap: &[f64]) -> f64 {
        let k = self.cols.len();
        let dim = gap.len();
        let mut best = f64::INFINITY;
        let mut shifted = vec![0.0; dim];
        let mut rhs = [0.0; RELAX_MAX_SPECIES];
        let mut x = [0.0; RELAX_MAX_SPECIES];
        for at_upper in 0..1usize << k {
            shifted.copy_from_slice(gap);
            for i in (0..k).filter(|i| at_upper >> i & 1 == 1) {
                for (g, c) in shifted.iter_mut().zip(&self.cols[i]) {
                    *g -= self.upper[i] * c;
                }
            }
            let rest = !at_upper & ((1 << k) - 1);
            // every subset of the remaining variables is free, the others zero
            let mut free = rest;
            loop {
                if let Some(inv) = &self.gram_inv[free] {
                    let idx: Vec<usize> = (0..k).filter(|i| free >> i & 1 == 1).collect();
                    let n = idx.len();
                    for (a, &i) in idx.iter().enumerate() {
                        rhs[a] = self.cols[i].iter().zip(&shifted).map(|(c, g)| c * g).sum();
                    }
                    let mut inside = true;
                    for a in 0..n {
                        x[a] = (0..n).map(|b| inv[a * n + b] * rhs[b]).sum();
                        if !(x[a] >= 0.0 && x[a] <= self.upper[idx[a]]) {
                            inside = false;
                        }
                    }
                    if inside {
                        let mut sq = 0.0;
                        for (u, g) in shifted.iter().enumerate() {
                            let mut r = *g;
                            for (a, &i) in idx.iter().enumerate() {
                                r -= x[a] * self.cols[i][u];
                            }
                            sq += r * r;
                        }
                        best = best.min(sq);
                    }
                }
                if free == 0 {
                    break;
                }
                free = (free - 1) & rest;
            }
        }
        best
    }
}

/// In-place inverse of a small symmetric positive definite matrix by
/// Gauss-Jordan elimination; `None` when (nearly) singular.
fn invert_small(g: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| g[i * n + i]).fold(0.0, f64::max);
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| g[a * n + col].abs().total_cmp(&g[b * n + col].abs()))?;
        if g[pivot * n + col].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        for j in 0..n {
            g.swap(col * n + j, pivot * n + j);
            inv.swap(col * n + j, pivot * n + j);
        }
        let p = g[col * n + col];
        for j in 0..n {
            g[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = g[r * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        g[r * n + j] -= f * g[col * n + j];
                        inv[r * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

struct Incumbent {
    sq: f64,
    x: Vec<u32>,
}

struct Outcome {
    best: Option<Incumbent>,
    exhausted: bool,
}

struct Node {
    bound: f64,
    depth: usize,
    seq: usize,
    /// Index into the search's partial and assignment arenas.
    slot: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: the "greatest" node is the lowest bound,
    // then the deepest, then the earliest generated.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Effect of giving `c` robots of the species at some depth to task `m`,
/// tabulated for every `(m, c)` so children are scored by lookups.
struct Tables {
    width: usize,
    /// Squared overshoot of the row.
    over: Vec<f64>,
    /// Full squared residual of the row.
    sq: Vec<f64>,
    /// Whether the row covers the target (strict constraint).
    covers: Vec<bool>,
    /// Per-trait shortfall of the row, `[(m, c), u]`.
    short: Vec<f64>,
    /// Per-task relaxation bound of the row's completion.
    relaxed: Vec<f64>,
}

impl Tables {
    fn new() -> Self {
        Tables {
            width: 0,
            over: Vec::new(),
            sq: Vec::new(),
            covers: Vec::new(),
            short: Vec::new(),
            relaxed: Vec::new(),
        }
    }
}

impl<'a> Search<'a> {
    fn new(target: &'a TraitAllocation, team: &'a Team, budget: usize) -> Self {
        let tasks = target.tasks();
        let traits = target.traits();
        let species = team.species_count();
        let mut order: Vec<usize> = (0..species).collect();
        let weight = |s: usize| {
            f64::from(team.counts()[s]) * team.normalized_species_traits(s).iter().sum::<f64>()
        };
        order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(a.cmp(&b)));

        let mut suffix = vec![vec![0.0; traits]; species + 1];
        for k in (0..species).rev() {
            let s = order[k];
            let n = f64::from(team.counts()[s]);
            for u in 0..traits {
                suffix[k][u] = suffix[k + 1][u] + n * team.normalized_species_traits(s)[u];
            }
        }
        let dists = order
            .iter()
            .map(|&s| species_distributions(team.counts()[s], tasks))
            .collect();
        let relax = (0..=species)
            .map(|k| {
                let rest = &order[k..];
                if rest.is_empty() || rest.len() > RELAX_MAX_SPECIES {
                    return None;
                }
                Some(TaskRelaxation::new(
                    rest.iter()
                        .map(|&s| team.normalized_species_traits(s).to_vec())
                        .collect(),
                    rest.iter().map(|&s| f64::from(team.counts()[s])).collect(),
                ))
            })
            .collect();
        Search {
            target,
            team,
            tasks,
            traits,
            species,
            order,
            suffix,
            dists,
            relax,
            budget,
        }
    }

    fn finish(&self, x: Vec<u32>, phase: SolvePhase, budget_exhausted: bool) -> SolveResult {
        let assignment = Assignment::from_flat(self.tasks, self.species, x);
        let residual = frobenius_residual(&assignment, self.team, self.target);
        SolveResult {
            assignment,
            residual,
            phase,
            budget_exhausted,
        }
    }

    /// Fills `t` for branching on species `order[depth]` below `partial`.
    fn tabulate(&self, partial: &[f64], depth: usize, t: &mut Tables) {
        let q = self.team.normalized_species_traits(self.order[depth]);
        let width = self.team.counts()[self.order[depth]] as usize + 1;
        let cells = self.tasks * width;
        t.width = width;
        t.over.clear();
        t.sq.clear();
        t.covers.clear();
        t.short.clear();
        t.relaxed.clear();
        let relax = self.relax[depth + 1].as_ref();
        let mut gap = vec![0.0; self.traits];
        for m in 0..self.tasks {
            let row = &partial[m * self.traits..(m + 1) * self.traits];
            for c in 0..width {
                let c = c as f64;
                let (mut over, mut sq, mut covers) = (0.0, 0.0, true);
                for u in 0..self.traits {
                    let v = row[u] + c * q[u];
                    let diff = v - self.target.get(m, u);
                    gap[u] = -diff;
                    sq += diff * diff;
                    if diff > 0.0 {
                        over += diff * diff;
                        t.short.push(0.0);
                    } else {
                        t.short.push(-diff);
                    }
                    if diff < -FEASIBILITY_TOL {
                        covers = false;
                    }
                }
                t.over.push(over);
                t.sq.push(sq);
                t.covers.push(covers);
                t.relaxed.push(relax.map_or(0.0, |r| r.min_sq(&gap)));
            }
        }
        debug_assert_eq!(t.over.len(), cells);
    }

    /// Admissible lower bound on the squared residual of any completion of
    /// the child `dist` once `depth + 1` species are committed; `None` when
    /// the strict phase can no longer be satisfied.
    fn child_bound(
        &self,
        t: &Tables,
        dist: &[u32],
        depth: usize,
        strict: bool,
        scratch: &mut [f64],
    ) -> Option<f64> {
        let mut lb = 0.0;
        let mut relaxed = 0.0;
        for (m, &c) in dist.iter().enumerate() {
            lb += t.over[m * t.width + c as usize];
            relaxed += t.relaxed[m * t.width + c as usize];
        }
        let cap = &self.suffix[depth + 1];
        for u in 0..self.traits {
            let mut need = 0.0;
            for (m, &c) in dist.iter().enumerate() {
                let d = t.short[(m * t.width + c as usize) * self.traits + u];
                scratch[m] = d;
                need += (d - FEASIBILITY_TOL).max(0.0);
            }
            if strict {
                if need > cap[u] + FEASIBILITY_TOL {
                    return None;
                }
            } else {
                lb += waterfill(scratch, cap[u]);
            }
        }
        Some(lb.max(relaxed))
    }

    /// Exact squared residual of a complete assignment, or `None` if it
    /// violates the strict constraint.
    fn child_leaf(&self, t: &Tables, dist: &[u32], strict: bool) -> Option<f64> {
        let mut sq = 0.0;
        for (m, &c) in dist.iter().enumerate() {
            let i = m * t.width + c as usize;
            if strict && !t.covers[i] {
                return None;
            }
            sq += t.sq[i];
        }
        Some(sq)
    }

    /// Adds species `order[depth]` distributed as `dist` to `partial`.
    fn extend_into(&self, partial: &[f64], depth: usize, dist: &[u32], out: &mut Vec<f64>) {
        let q = self.team.normalized_species_traits(self.order[depth]);
        for (m, &n) in dist.iter().enumerate() {
            let n = f64::from(n);
            for u in 0..self.traits {
                out.push(partial[m * self.traits + u] + n * q[u]);
            }
        }
    }

    fn place(&self, x: &mut [u32], depth: usize, dist: &[u32]) {
        let s = self.order[depth];
        for (m, &n) in dist.iter().enumerate() {
            x[m * self.species + s] = n;
        }
    }

    fn offer(best: &mut Option<Incumbent>, sq: f64, x: &[u32]) {
        let better = match best {
            None => true,
            Some(b) => {
                if (sq - b.sq).abs() <= TIE_EPS {
                    x < b.x.as_slice()
                } else {
                    sq < b.sq
                }
            }
        };
        if better {
            *best = Some(Incumbent { sq, x: x.to_vec() });
        }
    }

    /// Scores every completion of a node whose only missing species is the
    /// last one.
    fn finish_leaves(
        &self,
        t: &Tables,
        x: &[u32],
        strict: bool,
        best: &mut Option<Incumbent>,
    ) -> usize {
        let depth = self.species - 1;
        let mut xs = x.to_vec();
        for dist in &self.dists[depth] {
            if let Some(sq) = self.child_leaf(t, dist, strict) {
                let promising = match best {
                    None => true,
                    Some(b) => sq <= b.sq + TIE_EPS,
                };
                if promising {
                    self.place(&mut xs, depth, dist);
                    Self::offer(best, sq, &xs);
                }
            }
        }
        self.dists[depth].len()
    }

    /// Greedy descent that always follows the child with the smallest bound,
    /// to seed the incumbent.
    fn dive(&self, strict: bool, best: &mut Option<Incumbent>, t: &mut Tables) -> usize {
        let mut partial = vec![0.0; self.tasks * self.traits];
        let mut x = vec![0u32; self.tasks * self.species];
        let mut scratch = vec![0.0; self.tasks];
        let mut generated = 0;
        for depth in 0..self.species - 1 {
            self.tabulate(&partial, depth, t);
            let mut choice: Option<(f64, &Vec<u32>)> = None;
            for dist in &self.dists[depth] {
                generated += 1;
                if let Some(lb) = self.child_bound(t, dist, depth, strict, &mut scratch) {
                    if choice.is_none_or(|c| lb < c.0) {
                        choice = Some((lb, dist));
                    }
                }
            }
            match choice {
                Some((_, dist)) => {
                    self.place(&mut x, depth, dist);
                    let mut next = Vec::with_capacity(partial.len());
                    self.extend_into(&partial, depth, dist, &mut next);
                    partial = next;
                }
                None => return generated,
            }
        }
        self.tabulate(&partial, self.species - 1, t);
        generated + self.finish_leaves(t, &x, strict, best)
    }

    fn run(&self, strict: bool) -> Outcome {
        let mut best = None;
        let mut tables = Tables::new();
        let mut generated = self.dive(strict, &mut best, &mut tables);

        let mu = self.tasks * self.traits;
        let ms = self.tasks * self.species;
        let mut partials = vec![0.0; mu];
        let mut xs = vec![0u32; ms];
        let mut scratch = vec![0.0; self.tasks];
        let mut heap = BinaryHeap::new();
        heap.push(Node {
            bound: 0.0,
            depth: 0,
            seq: 0,
            slot: 0,
        });
        let mut seq = 1;
        let mut exhausted = false;

        while let Some(node) = heap.pop() {
            if let Some(b) = &best {
                if node.bound > b.sq + TIE_EPS {
                    break;
                }
            }
            if generated >= self.budget {
                exhausted = true;
                break;
            }
            let partial = partials[node.slot * mu..(node.slot + 1) * mu].to_vec();
            let x = xs[node.slot * ms..(node.slot + 1) * ms].to_vec();
            self.tabulate(&partial, node.depth, &mut tables);
            if node.depth == self.species - 1 {
                generated += self.finish_leaves(&tables, &x, strict, &mut best);
                continue;
            }
            for dist in &self.dists[node.depth] {
                generated += 1;
                let Some(lb) = self.child_bound(&tables, dist, node.depth, strict, &mut scratch)
                else {
                    continue;
                };
                if best.as_ref().is_some_and(|b| lb > b.sq + TIE_EPS) {
                    continue;
                }
                let slot = xs.len() / ms;
                self.extend_into(&partial, node.depth, dist, &mut partials);
                xs.extend_from_slice(&x);
                self.place(&mut xs[slot * ms..], node.depth, dist);
                heap.push(Node {
                    bound: lb,
                    depth: node.depth + 1,
                    seq,
                    slot,
                });
                seq += 1;
            }
        }
        Outcome { best, exhausted }
    }
}
