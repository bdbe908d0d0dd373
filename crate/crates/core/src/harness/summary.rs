//! Aggregation of run metrics into per-team and per-strategy tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::RunKey;
use crate::baselines::StrategyKind;
use crate::error::{Error, Result};

/// The metric series of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunDigest {
    pub key: RunKey,
    pub optimum: f64,
    pub optimum_exact: bool,
    pub bur_normalized: Vec<f64>,
    pub cmr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub mean_final_bur_normalized: f64,
    pub mean_final_cmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamSummary {
    pub team: usize,
    /// Position when teams are ordered by increasing optimum, from 1.
    pub rank: usize,
    pub optimum: f64,
    pub optimum_exact: bool,
    pub strategies: Vec<StrategySummary>,
}

/// Team-averaged metrics of one strategy at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub strategy: StrategyKind,
    pub bur_normalized: f64,
    pub cmr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Teams ordered by increasing optimum.
    pub teams: Vec<TeamSummary>,
    /// Means over teams of the per-team round means.
    pub strategies: Vec<StrategySummary>,
    pub curves: Vec<CurvePoint>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn mean_series(series: &[&[f64]], len: usize) -> Vec<f64> {
    (0..len).map(|i| mean(series.iter().map(|s| s[i]))).collect()
}

pub fn summarize(digests: &[RunDigest], iterations: usize) -> Summary {
    // (strategy, team) -> runs
    let mut groups: BTreeMap<(StrategyKind, usize), Vec<&RunDigest>> = BTreeMap::new();
    let mut optima: BTreeMap<usize, (f64, bool)> = BTreeMap::new();
    for d in digests {
        groups.entry((d.key.strategy, d.key.team)).or_default().push(d);
        optima.insert(d.key.team, (d.optimum, d.optimum_exact));
    }
    for runs in groups.values_mut() {
        runs.sort_by_key(|d| d.key.round);
    }

    let mut order: Vec<(usize, f64, bool)> =
        optima.iter().map(|(&t, &(o, e))| (t, o, e)).collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let per_team_stats = |strategy: StrategyKind, team: usize| -> Option<StrategySummary> {
        let runs = groups.get(&(strategy, team))?;
        Some(StrategySummary {
            strategy,
            runs: runs.len(),
            mean_final_bur_normalized: mean(runs.iter().map(|d| *d.bur_normalized.last().unwrap())),
            mean_final_cmr: mean(runs.iter().map(|d| *d.cmr.last().unwrap())),
        })
    };

    let mut strategies_present: Vec<StrategyKind> = groups.keys().map(|k| k.0).collect();
    strategies_present.dedup();

    let teams: Vec<TeamSummary> = order
        .iter()
        .enumerate()
        .map(|(rank, &(team, optimum, exact))| TeamSummary {
            team,
            rank: rank + 1,
            optimum,
            optimum_exact: exact,
            strategies: strategies_present
                .iter()
                .filter_map(|&s| per_team_stats(s, team))
                .collect(),
        })
        .collect();

    let mut strategies = Vec::new();
    let mut curves = Vec::new();
    for &s in &strategies_present {
        let per_team: Vec<StrategySummary> = order
            .iter()
            .filter_map(|&(team, _, _)| per_team_stats(s, team))
            .collect();
        strategies.push(StrategySummary {
            strategy: s,
            runs: per_team.iter().map(|t| t.runs).sum(),
            mean_final_bur_normalized: mean(per_team.iter().map(|t| t.mean_final_bur_normalized)),
            mean_final_cmr: mean(per_team.iter().map(|t| t.mean_final_cmr)),
        });

        let mut bur_curves = Vec::new();
        let mut cmr_curves = Vec::new();
        for &(team, _, _) in &order {
            if let Some(runs) = groups.get(&(s, team)) {
                let bur: Vec<&[f64]> = runs.iter().map(|d| d.bur_normalized.as_slice()).collect();
                let cmr: Vec<&[f64]> = runs.iter().map(|d| d.cmr.as_slice()).collect();
                bur_curves.push(mean_series(&bur, iterations));
                cmr_curves.push(mean_series(&cmr, iterations));
            }
        }
        for i in 0..iterations {
            curves.push(CurvePoint {
                iteration: i + 1,
                strategy: s,
                bur_normalized: mean(bur_curves.iter().map(|c| c[i])),
                cmr: mean(cmr_curves.iter().map(|c| c[i])),
            });
        }
    }
    Summary {
        teams,
        strategies,
        curves,
    }
}

#[derive(Serialize)]
struct SummaryRow {
    scope: String,
    rank: Option<usize>,
    optimum: Option<f64>,
    strategy: StrategyKind,
    runs: usize,
    mean_final_bur_normalized: f64,
    mean_final_cmr: f64,
}

impl Summary {
    pub fn strategy(&self, kind: StrategyKind) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.strategy == kind)
    }

    /// Writes `summary.json`, `summary.csv` and `curves.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        let path = dir.join("summary.json");
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &self.teams {
            for s in &t.strategies {
                w.serialize(SummaryRow {
                    scope: format!("team{:02}", t.team),
                    rank: Some(t.rank),
                    optimum: Some(t.optimum),
                    strategy: s.strategy,
                    runs: s.runs,
                    mean_final_bur_normalized: s.mean_final_bur_normalized,
                    mean_final_cmr: s.mean_final_cmr,
                })?;
            }
        }
        for s in &self.strategies {
            w.serialize(SummaryRow {
                scope: "all".into(),
                rank: None,
                optimum: None,
                strategy: s.strategy,
                runs: s.runs,
                mean_final_bur_normalized: s.mean_final_bur_normalized,
                mean_final_cmr: s.mean_final_cmr,
            })?;
        }
        let path = dir.join("summary.csv");
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;

        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.curves {
            w.serialize(p)?;
        }
        let path = dir.join("curves.csv");
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Deserialize)]
struct ManifestOptimum {
    total: f64,
    exact: bool,
}

#[derive(Deserialize)]
struct ManifestHead {
    key: RunKey,
    csv: String,
    optimum: ManifestOptimum,
}

#[derive(Deserialize)]
struct MetricColumns {
    bur_normalized: f64,
    cmr: f64,
}

/// Reads the run CSVs of one run directory back into digests.
pub fn load_digests(dir: &Path) -> Result<Vec<RunDigest>> {
    let runs_dir = dir.join("runs");
    let entries = std::fs::read_dir(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
    let mut manifests: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    manifests.sort();
    let mut digests = Vec::with_capacity(manifests.len());
    for path in manifests {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let head: ManifestHead = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let csv_path = runs_dir.join(&head.csv);
        let mut reader = csv::Reader::from_path(&csv_path)?;
        let mut bur_normalized = Vec::new();
        let mut cmr = Vec::new();
        for row in reader.deserialize::<MetricColumns>() {
            let row = row?;
            bur_normalized.push(row.bur_normalized);
            cmr.push(row.cmr);
        }
        if bur_normalized.is_empty() {
            return Err(Error::Parse {
                path: csv_path,
                reason: "run log has no iterations".into(),
            });
        }
        digests.push(RunDigest {
            key: head.key,
            optimum: head.optimum.total,
            optimum_exact: head.optimum.exact,
            bur_normalized,
            cmr,
        });
    }
    Ok(digests)
}

/// Recomputes the summary of a finished experiment from its run files.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let digests = load_digests(dir)?;
    let iterations = digests.iter().map(|d| d.cmr.len()).min().ok_or_else(|| Error::Parse {
        path: dir.to_path_buf(),
        reason: "no runs found".into(),
    })?;
    Ok(summarize(&digests, iterations))
}
