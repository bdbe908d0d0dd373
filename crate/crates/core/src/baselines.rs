//! Ablation strategies and a common driver over all four selection rules.
//!
//! * FD keeps the CMTAB grid fixed: neighborhoods collapse onto the grid
//!   points but the UCB bonus is kept.
//! * IA runs a single-task CMTAB selection per task and stacks the results,
//!   scaling over-budget trait columns back to the budget.
//! * US samples feasible matrices uniformly at random and ignores the models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::cmtab::{
    beta, build_candidate_set, grid_candidates, scan_candidates, select_target, CandidateSet,
    CmtabConfig, Selection,
};
use crate::error::{Error, Result};
use crate::gp::TraitRewardModel;
use crate::problem::{Team, TraitAllocation};

const UNIFORM_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Cmtab,
    Fd,
    Ia,
    Us,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Cmtab,
        StrategyKind::Fd,
        StrategyKind::Ia,
        StrategyKind::Us,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Cmtab => "cmtab",
            StrategyKind::Fd => "fd",
            StrategyKind::Ia => "ia",
            StrategyKind::Us => "us",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// Fixed-grid UCB selection: every neighborhood is the grid point itself.
pub fn fd_select(
    models: &[TraitRewardModel],
    grid: &CandidateSet,
    cfg: &CmtabConfig,
    i: usize,
) -> Selection {
    let b = beta(i, cfg, grid.len());
    // N_f identical points average to the point itself
    scan_candidates(grid, models, b, |c, _| vec![c.clone()])
}

/// Per-task selections and the stacked, budget-scaled target.
#[derive(Debug, Clone, PartialEq)]
pub struct IaSelection {
    pub per_task: Vec<Selection>,
    pub target: TraitAllocation,
}

/// Independent single-task selections, stacked into one target.
pub fn ia_select(
    models: &[TraitRewardModel],
    per_task: &[CandidateSet],
    cfg: &CmtabConfig,
    i: usize,
    rng: &mut impl Rng,
) -> IaSelection {
    assert_eq!(models.len(), per_task.len(), "one candidate set per task required");
    let picks: Vec<Selection> = per_task
        .iter()
        .zip(models)
        .map(|(set, model)| select_target(set, std::slice::from_ref(model), cfg, i, rng))
        .collect();
    let rows: Vec<&[f64]> = picks.iter().map(|s| s.target.row(0)).collect();
    IaSelection {
        target: stack_within_budget(&rows),
        per_task: picks,
    }
}

/// Stacks per-task rows; any trait column summing above one is scaled
/// uniformly down to one.
pub fn stack_within_budget(rows: &[&[f64]]) -> TraitAllocation {
    assert!(!rows.is_empty());
    let traits = rows[0].len();
    let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
    let mut y = TraitAllocation::from_flat(rows.len(), traits, data);
    y.scale_to_budget();
    y
}

/// A feasible `tasks x traits` matrix drawn uniformly from the feasible set.
///
/// Trait columns are independent under the budget constraint, so each column
/// is drawn on its own by rejection from the unit cube. A column rejected too
/// often is drawn directly from the flat Dirichlet over `tasks + 1` parts
/// (the spare budget being the last), which is the same distribution.
pub fn us_select(tasks: usize, traits: usize, rng: &mut impl Rng) -> TraitAllocation {
    let mut y = TraitAllocation::zeros(tasks, traits);
    let mut column = vec![0.0; tasks];
    for u in 0..traits {
        let mut accepted = false;
        for _ in 0..UNIFORM_ATTEMPTS {
            for v in column.iter_mut() {
                *v = rng.random::<f64>();
            }
            if column.iter().sum::<f64>() <= 1.0 {
                accepted = true;
                break;
            }
        }
        if !accepted {
            let gaps: Vec<f64> = (0..=tasks).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = gaps.iter().sum();
            for (v, g) in column.iter_mut().zip(&gaps) {
                *v = g / total;
            }
        }
        for (m, v) in column.iter().enumerate() {
            y.set(m, u, *v);
        }
    }
    y
}

/// Internal per-strategy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
enum StrategyState {
    Cmtab(CandidateSet),
    Fd(CandidateSet),
    Ia(Vec<CandidateSet>),
    Us { tasks: usize, traits: usize },
}

/// A strategy's choice for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub target: TraitAllocation,
    /// Chosen candidate index per candidate set (empty for US).
    pub picks: Vec<usize>,
}

/// Uniform driver over the four selection rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    kind: StrategyKind,
    state: StrategyState,
}

impl Strategy {
    pub fn new(
        kind: StrategyKind,
        team: &Team,
        tasks: usize,
        horizon: usize,
        cfg: &CmtabConfig,
    ) -> Result<Self> {
        let state = match kind {
            StrategyKind::Cmtab => {
                StrategyState::Cmtab(build_candidate_set(team, tasks, horizon, cfg)?)
            }
            StrategyKind::Fd => StrategyState::Fd(build_candidate_set(team, tasks, horizon, cfg)?),
            StrategyKind::Ia => {
                cfg.validate()?;
                if tasks == 0 {
                    return Err(Error::Config("at least one task is required".into()));
                }
                let grid = grid_candidates(1, team.trait_count(), cfg.grid_resolution);
                let sets = (0..tasks)
                    .map(|_| CandidateSet::new(grid.clone(), horizon))
                    .collect::<Result<_>>()?;
                StrategyState::Ia(sets)
            }
            StrategyKind::Us => {
                if tasks == 0 {
                    return Err(Error::Config("at least one task is required".into()));
                }
                StrategyState::Us {
                    tasks,
                    traits: team.trait_count(),
                }
            }
        };
        Ok(Strategy { kind, state })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Whether the strategy consults the reward models.
    pub fn uses_models(&self) -> bool {
        self.kind != StrategyKind::Us
    }

    /// Candidate sets with their counts, one per task for IA.
    pub fn candidate_sets(&self) -> Vec<&CandidateSet> {
        match &self.state {
            StrategyState::Cmtab(s) | StrategyState::Fd(s) => vec![s],
            StrategyState::Ia(sets) => sets.iter().collect(),
            StrategyState::Us { .. } => Vec::new(),
        }
    }

    /// Chooses a target for iteration `i` (1-based).
    pub fn propose(
        &self,
        models: &[TraitRewardModel],
        cfg: &CmtabConfig,
        i: usize,
        rng: &mut impl Rng,
    ) -> Proposal {
        match &self.state {
            StrategyState::Cmtab(set) => {
                let sel = select_target(set, models, cfg, i, rng);
                Proposal {
                    target: sel.target,
                    picks: vec![sel.index],
                }
            }
            StrategyState::Fd(set) => {
                let sel = fd_select(models, set, cfg, i);
                Proposal {
                    target: sel.target,
                    picks: vec![sel.index],
                }
            }
            StrategyState::Ia(sets) => {
                let sel = ia_select(models, sets, cfg, i, rng);
                Proposal {
                    target: sel.target,
                    picks: sel.per_task.iter().map(|s| s.index).collect(),
                }
            }
            StrategyState::Us { tasks, traits } => Proposal {
                target: us_select(*tasks, *traits, rng),
                picks: Vec::new(),
            },
        }
    }

    /// Credits the chosen candidates.
    pub fn record(&mut self, proposal: &Proposal) {
        match &mut self.state {
            StrategyState::Cmtab(set) | StrategyState::Fd(set) => {
                set.record_sample(proposal.picks[0])
            }
            StrategyState::Ia(sets) => {
                for (set, &idx) in sets.iter_mut().zip(&proposal.picks) {
                    set.record_sample(idx);
                }
            }
            StrategyState::Us { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmtab::confidence_radius;
    use crate::gp::KernelConfig;
    use crate::problem::is_feasible_target;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn priors(tasks: usize, traits: usize) -> Vec<TraitRewardModel> {
        (0..tasks)
            .map(|_| TraitRewardModel::new(KernelConfig::default(), traits).unwrap())
            .collect()
    }

    fn team() -> Team {
        Team::new(
            vec![3, 2, 4],
            vec![vec![1.0, 0.2, 0.0], vec![0.1, 1.0, 0.5], vec![0.4, 0.4, 0.9]],
        )
        .unwrap()
    }

    fn small_cfg() -> CmtabConfig {
        CmtabConfig {
            grid_resolution: 2,
            neighborhood_size: 4,
            ..CmtabConfig::default()
        }
    }

    #[test]
    fn kind_round_trips() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{k}\""));
        }
        assert!("thompson".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn fd_breaks_ties_to_lowest_index() {
        let grid = CandidateSet::new(grid_candidates(2, 2, 2), 50).unwrap();
        let sel = fd_select(&priors(2, 2), &grid, &small_cfg(), 1);
        assert_eq!(sel.index, 0);
        assert_eq!(sel.target, *grid.candidate(0));
    }

    #[test]
    fn fd_targets_are_grid_points() {
        let cfg = CmtabConfig {
            grid_resolution: 3,
            ..small_cfg()
        };
        let mut strategy = Strategy::new(StrategyKind::Fd, &team(), 2, 30, &cfg).unwrap();
        let mut models = priors(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 1..=30 {
            let p = strategy.propose(&models, &cfg, i, &mut rng);
            let set = strategy.candidate_sets()[0];
            assert_eq!(p.target, *set.candidate(p.picks[0]));
            strategy.record(&p);
            for (m, model) in models.iter_mut().enumerate() {
                let r = p.target.row(m).iter().sum::<f64>();
                model.observe(p.target.row(m), r).unwrap();
            }
        }
        assert_eq!(strategy.candidate_sets()[0].total_samples(), 30);
    }

    #[test]
    fn ia_scaling_example() {
        let y = stack_within_budget(&[&[1.0], &[1.0]]);
        assert_eq!(y.as_slice(), &[0.5, 0.5]);
        let y = stack_within_budget(&[&[0.3, 0.8], &[0.4, 0.6]]);
        assert_eq!(y.get(0, 0), 0.3);
        assert_eq!(y.get(1, 0), 0.4);
        assert!((y.column_sum(1) - 1.0).abs() < 1e-12);
        assert!((y.get(0, 1) / y.get(1, 1) - 0.8 / 0.6).abs() < 1e-12);
    }

    #[test]
    fn ia_greedy_stack_is_scaled() {
        // both tasks learn that y = 1 is best, so both pick it
        let kernel = KernelConfig::default();
        let mut models: Vec<_> = (0..2).map(|_| TraitRewardModel::new(kernel, 1).unwrap()).collect();
        for model in &mut models {
            model.observe(&[1.0], 5.0).unwrap();
            model.observe(&[0.0], 0.0).unwrap();
        }
        let grid = grid_candidates(1, 1, 2);
        let sets: Vec<_> = (0..2).map(|_| CandidateSet::new(grid.clone(), 20).unwrap()).collect();
        let cfg = CmtabConfig {
            neighborhood_size: 1,
            beta: crate::cmtab::BetaSchedule::Constant { value: 0.0 },
            ..small_cfg()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sel = ia_select(&models, &sets, &cfg, 1, &mut rng);
        assert!(sel.per_task.iter().all(|s| s.target.as_slice() == [1.0]));
        assert_eq!(sel.target.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn ia_single_task_matches_cmtab() {
        let cfg = CmtabConfig {
            grid_resolution: 3,
            ..small_cfg()
        };
        let t = team();
        let mut cmtab = Strategy::new(StrategyKind::Cmtab, &t, 1, 40, &cfg).unwrap();
        let mut ia = Strategy::new(StrategyKind::Ia, &t, 1, 40, &cfg).unwrap();
        let mut models = priors(1, 3);
        let mut rng_a = ChaCha8Rng::seed_from_u64(11);
        let mut rng_b = ChaCha8Rng::seed_from_u64(11);
        for i in 1..=15 {
            let a = cmtab.propose(&models, &cfg, i, &mut rng_a);
            let b = ia.propose(&models, &cfg, i, &mut rng_b);
            assert_eq!(a, b);
            cmtab.record(&a);
            ia.record(&b);
            let y = a.target.row(0);
            models[0].observe(y, y[0] - y[1] * y[1]).unwrap();
        }
    }

    #[test]
    fn ia_counts_sum_to_iterations() {
        let cfg = small_cfg();
        let mut strategy = Strategy::new(StrategyKind::Ia, &team(), 3, 20, &cfg).unwrap();
        let models = priors(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 1..=12 {
            let p = strategy.propose(&models, &cfg, i, &mut rng);
            assert!(is_feasible_target(&p.target));
            assert_eq!(p.picks.len(), 3);
            strategy.record(&p);
            for set in strategy.candidate_sets() {
                assert_eq!(set.total_samples(), i as u64);
            }
        }
    }

    #[test]
    fn us_is_feasible_and_deterministic() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let y = us_select(3, 4, &mut a);
            assert!(is_feasible_target(&y));
            assert!(y.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(y, us_select(3, 4, &mut b));
        }
        // many tasks push almost every column into the fallback
        for _ in 0..100 {
            assert!(is_feasible_target(&us_select(12, 2, &mut a)));
        }
    }

    #[test]
    fn us_matches_rejection_centroid() {
        let (tasks, traits) = (3, 3);
        // oracle: whole-matrix rejection sampling, independently seeded
        let mut oracle_rng = ChaCha8Rng::seed_from_u64(1234);
        let mut accepted = 0usize;
        let mut oracle = vec![0.0; tasks * traits];
        while accepted < 40_000 {
            let draw: Vec<f64> = (0..tasks * traits).map(|_| oracle_rng.random()).collect();
            let y = TraitAllocation::from_flat(tasks, traits, draw);
            if is_feasible_target(&y) {
                for (o, v) in oracle.iter_mut().zip(y.as_slice()) {
                    *o += v;
                }
                accepted += 1;
            }
        }
        oracle.iter_mut().for_each(|o| *o /= accepted as f64);

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut mean = vec![0.0; tasks * traits];
        let draws = 10_000;
        for _ in 0..draws {
            for (acc, v) in mean.iter_mut().zip(us_select(tasks, traits, &mut rng).as_slice()) {
                *acc += v;
            }
        }
        for (m, o) in mean.iter().zip(&oracle) {
            let m = m / draws as f64;
            assert!((m - o).abs() / o < 0.02, "{m} vs {o}");
            // the simplex centroid is 1 / (tasks + 1)
            assert!((o - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn us_ignores_models_and_counts() {
        let cfg = small_cfg();
        let mut strategy = Strategy::new(StrategyKind::Us, &team(), 3, 10, &cfg).unwrap();
        assert!(!strategy.uses_models());
        assert!(strategy.candidate_sets().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = strategy.propose(&[], &cfg, 1, &mut rng);
        strategy.record(&p);
        assert!(p.picks.is_empty());
    }

    #[test]
    fn fd_never_shrinks_neighborhoods() {
        // FD utilities equal single-point evaluations even after many samples
        let cfg = small_cfg();
        let mut grid = CandidateSet::new(grid_candidates(1, 1, 2), 100).unwrap();
        let mut model = TraitRewardModel::new(KernelConfig::default(), 1).unwrap();
        model.observe(&[1.0], 1.0).unwrap();
        for _ in 0..5 {
            grid.record_sample(1);
        }
        let sel = fd_select(std::slice::from_ref(&model), &grid, &cfg, 3);
        let b = beta(3, &cfg, 2);
        let (mu, var) = model.predict(grid.candidate(sel.index).row(0));
        assert!((sel.utility - (mu + b * var.sqrt())).abs() < 1e-12);
        assert_eq!(sel.radius, confidence_radius(grid.counts()[sel.index], 100));
    }
}
