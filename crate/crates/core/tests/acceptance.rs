//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cocoa_core::baselines::StrategyKind;
use cocoa_core::cmtab::confidence_radius;
use cocoa_core::gp::{KernelConfig, TraitRewardModel};
use cocoa_core::harness::{
    build_environment_and_teams, execute, generate_demonstrations, generate_random_team,
    run_csv, write_demonstrations, ExperimentConfig, ExperimentOutcome,
};
use cocoa_core::problem::{is_feasible_target, Team, TraitAllocation};
use cocoa_core::solver::{exhaustive_oracle, solve_allocation};

const SWEEP: &str = r#"
master_seed = 2024
iterations = 400
rounds = 5
strategies = ["cmtab", "ia", "us", "fd"]

[environment]
preset = "random-3x3-v1"

[teams]
kind = "random"
count = 6
species = 4
count_range = [1, 10]

[cmtab]
grid_resolution = 2
neighborhood_size = 10
"#;

const SWEEP_BUDGET_SECS: f64 = 15.0 * 60.0;

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn final_means(outcome: &ExperimentOutcome) -> Vec<(StrategyKind, f64, f64)> {
    outcome
        .summary
        .strategies
        .iter()
        .map(|s| (s.strategy, s.mean_final_bur_normalized, s.mean_final_cmr))
        .collect()
}

fn lookup(means: &[(StrategyKind, f64, f64)], kind: StrategyKind) -> (f64, f64) {
    let &(_, bur, cmr) = means.iter().find(|m| m.0 == kind).unwrap();
    (bur, cmr)
}

fn strategy_ordering(report: &mut Report, outcome: &ExperimentOutcome, secs: f64) {
    use StrategyKind::*;
    let means = final_means(outcome);
    let (c, i, u, f) = (
        lookup(&means, Cmtab).0,
        lookup(&means, Ia).0,
        lookup(&means, Us).0,
        lookup(&means, Fd).0,
    );
    let ordered = c > i && i > u && u > f;
    let floor = c >= 0.85;
    let fast = secs <= SWEEP_BUDGET_SECS;
    report.line(
        "strategy-ordering",
        ordered && floor && fast && outcome.failures.is_empty(),
        format!(
            "final normalized BUR cmtab {c:.4} ia {i:.4} us {u:.4} fd {f:.4}; \
             order cmtab>ia>us>fd {ordered}; cmtab>=0.85 {floor}; sweep {secs:.0}s (limit {SWEEP_BUDGET_SECS:.0}s); failed runs {}",
            outcome.failures.len()
        ),
    );
}

fn regret_ordering(report: &mut Report, outcome: &ExperimentOutcome) {
    use StrategyKind::*;
    let means = final_means(outcome);
    let cmtab = lookup(&means, Cmtab).1;
    let others: Vec<String> = [Ia, Us, Fd]
        .iter()
        .map(|&k| format!("{k} {:.2}", lookup(&means, k).1))
        .collect();
    let lowest = [Ia, Us, Fd].iter().all(|&k| cmtab < lookup(&means, k).1);
    report.line(
        "regret-ordering",
        lowest,
        format!("CMR at 400: cmtab {cmtab:.2}, {}", others.join(", ")),
    );
}

/// Posterior from a fresh LU solve of the noisy Gram matrix.
fn direct_posterior(
    kernel: &KernelConfig,
    xs: &[Vec<f64>],
    rs: &[f64],
    jitter: f64,
    y: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
        kernel.signal_variance * (-d2 / (2.0 * kernel.lengthscale * kernel.lengthscale)).exp()
    };
    let gram = DMatrix::from_fn(n, n, |i, j| {
        k(&xs[i], &xs[j]) + if i == j { kernel.noise_variance + jitter } else { 0.0 }
    });
    let kstar = DVector::from_fn(n, |i, _| k(&xs[i], y));
    let lu = gram.lu();
    let alpha = lu.solve(&DVector::from_column_slice(rs)).unwrap();
    let v = lu.solve(&kstar).unwrap();
    (kstar.dot(&alpha), k(y, y) - kstar.dot(&v))
}

fn gp_correctness(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = if rng.random_bool(0.5) { 1 } else { 3 };
        let n = rng.random_range(1..=50);
        let kernel = KernelConfig::new(
            rng.random_range(0.1..0.5),
            rng.random_range(0.5..2.0),
            rng.random_range(0.01..0.1),
        )
        .unwrap();
        let mut model = TraitRewardModel::new(kernel, dim).unwrap();
        let mut xs = Vec::new();
        let mut rs = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let r = rng.random_range(-1.0..3.0);
            model.observe(&x, r).unwrap();
            xs.push(x);
            rs.push(r);
        }
        for _ in 0..20 {
            let y: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let (mu, var) = model.predict(&y);
            let (dmu, dvar) = direct_posterior(&kernel, &xs, &rs, model.jitter(), &y);
            worst = worst.max((mu - dmu).abs()).max((var - dvar.max(0.0)).abs());
        }
    }
    report.line(
        "gp-correctness",
        worst <= 1e-8,
        format!("100 models, max |predict - direct solve| = {worst:.2e} (limit 1e-8)"),
    );
}

fn solver_optimality(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut mismatches = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let species = rng.random_range(1..=3);
        let tasks = rng.random_range(1..=2);
        let traits = rng.random_range(1..=3);
        let counts: Vec<u32> = (0..species).map(|_| rng.random_range(1..=3)).collect();
        let q: Vec<Vec<f64>> = (0..species)
            .map(|_| (0..traits).map(|_| rng.random_range(0.05..1.0)).collect())
            .collect();
        let team = Team::new(counts, q).unwrap();
        let mut target = TraitAllocation::from_flat(
            tasks,
            traits,
            (0..tasks * traits).map(|_| rng.random()).collect(),
        );
        target.scale_to_budget();
        let got = solve_allocation(&target, &team).unwrap();
        let want = exhaustive_oracle(&target, &team, u128::MAX).unwrap();
        let diff = (got.residual - want.residual).abs();
        worst = worst.max(diff);
        if got.phase != want.phase || diff > 1e-9 {
            mismatches += 1;
        }
    }
    report.line(
        "solver-optimality",
        mismatches == 0,
        format!("200 tiny instances, {mismatches} mismatches, max residual gap {worst:.2e}"),
    );
}

fn feasibility(report: &mut Report, outcome: &ExperimentOutcome) {
    let mut deployed = 0usize;
    let mut bad_x = 0usize;
    let mut bad_y = 0usize;
    let mut full_runs = [0usize; 4];
    for log in &outcome.runs {
        let team = &outcome.teams[log.key.team].team;
        if log.records.len() == 400 {
            let slot = StrategyKind::ALL.iter().position(|&k| k == log.key.strategy).unwrap();
            full_runs[slot] += 1;
        }
        for rec in &log.records {
            deployed += 1;
            let over = (0..team.species_count())
                .any(|s| rec.assignment.species_total(s) > team.counts()[s]);
            if over || team.check_assignment(&rec.assignment).is_err() {
                bad_x += 1;
            }
            if !is_feasible_target(&rec.achieved) {
                bad_y += 1;
            }
        }
    }
    let every_strategy = full_runs.iter().all(|&n| n > 0);
    report.line(
        "feasibility",
        every_strategy && bad_x == 0 && bad_y == 0,
        format!(
            "{deployed} deployed assignments, {bad_x} over team counts, {bad_y} infeasible achieved matrices; full 400-iteration runs per strategy {full_runs:?}"
        ),
    );
}

fn metric_properties(report: &mut Report, outcome: &ExperimentOutcome) {
    let mut violations = 0usize;
    for log in &outcome.runs {
        let totals = log.true_totals();
        for i in 0..totals.len() {
            if log.cmr[i] < 0.0 {
                violations += 1;
            }
            if i == 0 {
                if log.cmr[0] != log.optimum - totals[0] {
                    violations += 1;
                }
                continue;
            }
            if log.bur[i] < log.bur[i - 1] || log.cmr[i] < log.cmr[i - 1] {
                violations += 1;
            }
            if log.cmr[i] != log.cmr[i - 1] + (log.optimum - totals[i]) {
                violations += 1;
            }
        }
    }
    report.line(
        "metric-properties",
        violations == 0,
        format!("{} runs checked, {violations} violations", outcome.runs.len()),
    );
}

fn determinism(report: &mut Report) {
    let text = SWEEP
        .replace("iterations = 400", "iterations = 100")
        .replace("rounds = 5", "rounds = 2")
        .replace("count = 6", "count = 2");
    let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    let csvs = |o: &ExperimentOutcome| -> Vec<(String, Vec<u8>)> {
        o.runs
            .iter()
            .map(|l| (l.key.stem(), run_csv(l).unwrap()))
            .collect()
    };
    let (ca, cb) = (csvs(&a), csvs(&b));
    let same = !ca.is_empty() && ca == cb;
    report.line(
        "determinism",
        same,
        format!("{} run CSVs compared byte for byte across two executions", ca.len()),
    );
}

fn bootstrap_benefit(report: &mut Report) {
    let mut with_means = Vec::new();
    let mut without_means = Vec::new();
    for seed in [101u64, 202, 303] {
        let text = SWEEP
            .replace("master_seed = 2024", &format!("master_seed = {seed}"))
            .replace("iterations = 400", "iterations = 50")
            .replace("strategies = [\"cmtab\", \"ia\", \"us\", \"fd\"]", "strategies = [\"cmtab\"]");
        let plain = ExperimentConfig::from_toml_str(&text).unwrap();
        let (env, _) = build_environment_and_teams(&plain).unwrap();
        let demo_team = generate_random_team(4, 3, (1, 10), seed ^ 0xDE50).unwrap();
        let demos = generate_demonstrations(&env, &demo_team, 20, seed + 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("demos.jsonl");
        write_demonstrations(&path, &demos).unwrap();
        let mut boosted = plain.clone();
        boosted.demonstrations = Some(path);

        let at_50 = |cfg: &ExperimentConfig| {
            let s = execute(cfg).unwrap().summary;
            s.strategy(StrategyKind::Cmtab).unwrap().mean_final_bur_normalized
        };
        without_means.push(at_50(&plain));
        with_means.push(at_50(&boosted));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (w, wo) = (mean(&with_means), mean(&without_means));
    let wins = with_means.iter().zip(&without_means).filter(|(a, b)| a > b).count();
    report.line(
        "bootstrap-benefit",
        w >= wo - 0.02 && wins >= 2,
        format!(
            "BUR@50 with demos {w:.4} vs without {wo:.4}; strictly better in {wins} of 3 seeds {:?} vs {:?}",
            with_means, without_means
        ),
    );
}

fn radius_spot_values(report: &mut Report) {
    let a = confidence_radius(0, 400);
    let b = confidence_radius(7, 400);
    report.line(
        "confidence-radius",
        (a - 3.4617).abs() <= 1e-3 && (b - 1.2239).abs() <= 1e-3,
        format!("radius(0, 400) = {a:.5}, radius(7, 400) = {b:.5}"),
    );
}

fn main() {
    let mut report = Report { failed: 0, total: 0 };

    radius_spot_values(&mut report);
    gp_correctness(&mut report);
    solver_optimality(&mut report);

    let cfg = ExperimentConfig::from_toml_str(SWEEP).unwrap();
    let start = Instant::now();
    let outcome = execute(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    strategy_ordering(&mut report, &outcome, secs);
    regret_ordering(&mut report, &outcome);
    feasibility(&mut report, &outcome);
    metric_properties(&mut report, &outcome);
    for t in &outcome.summary.teams {
        let row: Vec<String> = t
            .strategies
            .iter()
            .map(|s| format!("{} {:.4}/{:.1}", s.strategy, s.mean_final_bur_normalized, s.mean_final_cmr))
            .collect();
        println!(
            "  team {} (r* {:.4}{}): {}",
            t.team,
            t.optimum,
            if t.optimum_exact { "" } else { ", approximate" },
            row.join(", ")
        );
    }
    drop(outcome);

    determinism(&mut report);
    bootstrap_benefit(&mut report);

    println!(
        "acceptance: {} of {} criteria passed",
        report.total - report.failed,
        report.total
    );
    if report.failed > 0 {
        std::process::exit(1);
    }
}
