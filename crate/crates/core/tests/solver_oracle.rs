use cocoa_core::environment::{
    generate_environment, optimal_total_reward, EnvironmentPreset, RANDOM_PRESET,
};
use cocoa_core::problem::{is_feasible_target, Team, TraitAllocation};
use cocoa_core::solver::{solve_allocation, SolvePhase};
use proptest::prelude::*;

/// Every assignment of `counts` robots over `tasks` tasks, as flat row-major
/// `tasks x species` vectors.
fn all_assignments(counts: &[u32], tasks: usize) -> Vec<Vec<u32>> {
    let species = counts.len();
    let mut out = vec![vec![0u32; tasks * species]];
    for (s, &n) in counts.iter().enumerate() {
        let mut next = Vec::new();
        for x in &out {
            let mut split = vec![0u32; tasks];
            loop {
                if split.iter().sum::<u32>() <= n {
                    let mut y = x.clone();
                    for m in 0..tasks {
                        y[m * species + s] = split[m];
                    }
                    next.push(y);
                }
                let mut k = 0;
                while k < tasks {
                    split[k] += 1;
                    if split[k] <= n {
                        break;
                    }
                    split[k] = 0;
                    k += 1;
                }
                if k == tasks {
                    break;
                }
            }
        }
        out = next;
    }
    out
}

/// `X Q` divided by the team's per-trait capacity, computed from scratch.
fn achieved(x: &[u32], counts: &[u32], q: &[Vec<f64>], tasks: usize) -> Vec<f64> {
    let species = counts.len();
    let traits = q[0].len();
    let cap: Vec<f64> = (0..traits)
        .map(|u| (0..species).map(|s| counts[s] as f64 * q[s][u]).sum())
        .collect();
    let mut y = vec![0.0; tasks * traits];
    for m in 0..tasks {
        for u in 0..traits {
            let raw: f64 = (0..species).map(|s| x[m * species + s] as f64 * q[s][u]).sum();
            y[m * traits + u] = raw / cap[u];
        }
    }
    y
}

/// Best phase and residual over full enumeration: covering assignments win,
/// then the smallest Frobenius distance.
fn brute_force(target: &[f64], counts: &[u32], q: &[Vec<f64>], tasks: usize) -> (bool, f64) {
    let mut best: Option<(bool, f64)> = None;
    for x in all_assignments(counts, tasks) {
        let y = achieved(&x, counts, q, tasks);
        let covers = y.iter().zip(target).all(|(a, t)| *a >= t - 1e-9);
        let sq: f64 = y.iter().zip(target).map(|(a, t)| (a - t) * (a - t)).sum();
        best = match best {
            None => Some((covers, sq)),
            Some((bc, bsq)) => {
                if covers && !bc || covers == bc && sq < bsq {
                    Some((covers, sq))
                } else {
                    Some((bc, bsq))
                }
            }
        };
    }
    let (c, sq) = best.unwrap();
    (c, sq.sqrt())
}

fn instance() -> impl Strategy<Value = (Vec<u32>, Vec<Vec<f64>>, usize, Vec<f64>)> {
    (1usize..=4, 1usize..=3, 1usize..=3).prop_flat_map(|(species, traits, tasks)| {
        (
            prop::collection::vec(1u32..=3, species),
            prop::collection::vec(prop::collection::vec(0.05f64..1.0, traits), species),
            Just(tasks),
            prop::collection::vec(0.0f64..1.0, tasks * traits),
        )
    })
}

/// Random entries scaled down column by column until the budget holds.
fn feasible_target(raw: &[f64], tasks: usize, traits: usize) -> TraitAllocation {
    let mut y = TraitAllocation::from_flat(tasks, traits, raw.to_vec());
    y.scale_to_budget();
    assert!(is_feasible_target(&y));
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn solver_matches_enumeration((counts, q, tasks, raw) in instance()) {
        let traits = q[0].len();
        let team = Team::new(counts.clone(), q.clone()).unwrap();
        let target = feasible_target(&raw, tasks, traits);
        let got = solve_allocation(&target, &team).unwrap();
        let (covers, residual) = brute_force(target.as_slice(), &counts, &q, tasks);
        prop_assert_eq!(got.phase == SolvePhase::Strict, covers);
        prop_assert!((got.residual - residual).abs() <= 1e-9, "{} vs {}", got.residual, residual);
        prop_assert!(!got.budget_exhausted);
        team.check_assignment(&got.assignment).unwrap();
    }
}

#[test]
fn exactly_reachable_targets_are_hit() {
    let counts = vec![2, 3, 1, 2];
    let q = vec![
        vec![1.0, 0.2, 0.5],
        vec![0.3, 0.9, 0.1],
        vec![0.6, 0.6, 0.6],
        vec![0.0, 0.4, 1.0],
    ];
    let team = Team::new(counts.clone(), q.clone()).unwrap();
    let all = all_assignments(&counts, 3);
    for x in all.iter().step_by(97) {
        let y = TraitAllocation::from_flat(3, 3, achieved(x, &counts, &q, 3));
        let got = solve_allocation(&y, &team).unwrap();
        assert_eq!(got.phase, SolvePhase::Strict);
        assert!(got.residual < 1e-9, "residual {}", got.residual);
    }
}

#[test]
fn optimum_search_matches_enumeration() {
    let preset = EnvironmentPreset::named(RANDOM_PRESET).unwrap();
    let teams = [
        (vec![3, 4, 2], vec![vec![1.0, 0.1, 0.4], vec![0.2, 1.0, 0.3], vec![0.5, 0.5, 1.0]]),
        (vec![4, 4, 4], vec![vec![0.9, 0.8, 0.1], vec![0.1, 0.3, 1.0], vec![0.6, 0.1, 0.2]]),
        (vec![2, 5, 3], vec![vec![0.3, 0.3, 0.3], vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.7]]),
    ];
    for seed in 0..4u64 {
        let env = generate_environment(&preset, seed).unwrap();
        for (counts, q) in &teams {
            let team = Team::new(counts.clone(), q.clone()).unwrap();
            let best = all_assignments(counts, 3)
                .iter()
                .map(|x| {
                    let y = TraitAllocation::from_flat(3, 3, achieved(x, counts, q, 3));
                    env.true_total(&y)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let got = optimal_total_reward(&env, &team, 20_000_000).unwrap();
            assert!(got.exact);
            assert!((got.total - best).abs() < 1e-9, "seed {seed}: {} vs {best}", got.total);
            let y = team.normalized_allocation(&got.assignment).unwrap();
            assert_eq!(env.true_total(&y), got.total);
        }
    }
}
