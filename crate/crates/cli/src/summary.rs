//! Aggregation of run records into a comparison report.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use safebo::opt::{feasibility_rate, Algorithm, Phase, PhaseFilter};

use crate::experiment::RunFile;
use crate::stats::{median, percentile_sorted, ranksum, StatsError};

/// Significance level used to flag pairwise differences.
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SummaryError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub seeds: Vec<u64>,
    /// Best feasible value after each suggest-phase evaluation. `None` where
    /// the statistic is still infinite (no feasible point yet).
    pub median: Vec<Option<f64>>,
    pub p25: Vec<Option<f64>>,
    pub p75: Vec<Option<f64>>,
    pub final_best: Vec<Option<f64>>,
    pub median_final: Option<f64>,
    pub init_feasibility: Vec<Option<f64>>,
    pub suggest_feasibility: Vec<Option<f64>>,
    pub median_init_feasibility: Option<f64>,
    pub median_suggest_feasibility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub a: Algorithm,
    pub b: Algorithm,
    pub u: f64,
    pub p: f64,
    pub exact: bool,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub task: String,
    pub significance: f64,
    pub algorithms: Vec<AlgorithmSummary>,
    pub tests: Vec<PairwiseTest>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn median_of(values: &[Option<f64>]) -> Option<f64> {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    (!v.is_empty()).then(|| median(&v))
}

/// Final best values with "never feasible" ranked worst.
fn finals(runs: &[&RunFile]) -> Vec<f64> {
    runs.iter().map(|r| r.record.final_best().unwrap_or(f64::INFINITY)).collect()
}

fn summarize_algorithm(algorithm: Algorithm, runs: &[&RunFile]) -> Result<AlgorithmSummary, SummaryError> {
    let suggest_counts: Vec<usize> =
        runs.iter().map(|r| r.record.entries.iter().filter(|e| e.phase == Phase::Suggest).count()).collect();
    let budget = suggest_counts[0];
    if suggest_counts.iter().any(|&c| c != budget) {
        return Err(SummaryError::InvalidArgument(format!("{} runs differ in budget", algorithm.as_str())));
    }
    let traces: Vec<Vec<f64>> = runs
        .iter()
        .map(|r| {
            let start = r.record.entries.len() - budget;
            r.record.best_feasible[start..].iter().map(|b| b.unwrap_or(f64::INFINITY)).collect()
        })
        .collect();
    let (mut med, mut p25, mut p75) = (Vec::new(), Vec::new(), Vec::new());
    for j in 0..budget {
        let mut column: Vec<f64> = traces.iter().map(|t| t[j]).collect();
        column.sort_by(f64::total_cmp);
        med.push(finite(percentile_sorted(&column, 0.5)));
        p25.push(finite(percentile_sorted(&column, 0.25)));
        p75.push(finite(percentile_sorted(&column, 0.75)));
    }
    let rate = |r: &RunFile, f| feasibility_rate(&r.record, f).ok();
    let init_feasibility: Vec<Option<f64>> = runs.iter().map(|r| rate(r, PhaseFilter::Init)).collect();
    let suggest_feasibility: Vec<Option<f64>> = runs.iter().map(|r| rate(r, PhaseFilter::Suggest)).collect();
    Ok(AlgorithmSummary {
        algorithm,
        runs: runs.len(),
        seeds: runs.iter().map(|r| r.record.seed).collect(),
        median: med,
        p25,
        p75,
        final_best: runs.iter().map(|r| r.record.final_best()).collect(),
        median_final: finite(median(&finals(runs))),
        median_init_feasibility: median_of(&init_feasibility),
        median_suggest_feasibility: median_of(&suggest_feasibility),
        init_feasibility,
        suggest_feasibility,
    })
}

pub fn summarize(runs: &[RunFile]) -> Result<SummaryReport, SummaryError> {
    let first = runs.first().ok_or_else(|| SummaryError::InvalidArgument("no run records".into()))?;
    if let Some(other) = runs.iter().find(|r| r.task != first.task) {
        return Err(SummaryError::InvalidArgument(format!(
            "records mix tasks `{}` and `{}` or their parameters",
            first.task.id(),
            other.task.id()
        )));
    }
    let mut groups: BTreeMap<Algorithm, Vec<&RunFile>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.record.algorithm).or_default().push(r);
    }
    let algorithms = groups
        .iter()
        .map(|(alg, rs)| summarize_algorithm(*alg, rs))
        .collect::<Result<Vec<_>, _>>()?;
    let keys: Vec<Algorithm> = groups.keys().copied().collect();
    let mut tests = Vec::new();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let res = ranksum(&finals(&groups[a]), &finals(&groups[b]))?;
            tests.push(PairwiseTest { a: *a, b: *b, u: res.u, p: res.p, exact: res.exact, significant: res.p < SIGNIFICANCE });
        }
    }
    Ok(SummaryReport { task: first.task.id().to_string(), significance: SIGNIFICANCE, algorithms, tests })
}

impl SummaryReport {
    pub fn algorithm(&self, alg: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == alg)
    }

    pub fn test(&self, a: Algorithm, b: Algorithm) -> Option<&PairwiseTest> {
        self.tests.iter().find(|t| (t.a, t.b) == (a, b) || (t.a, t.b) == (b, a))
    }

    /// Percentile traces as CSV: `algorithm,index,p25,median,p75`. Infinite
    /// entries are left empty.
    pub fn write_traces_csv<W: Write>(&self, out: W) -> Result<(), SummaryError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| SummaryError::Io(e.to_string());
        w.write_record(["algorithm", "index", "p25", "median", "p75"]).map_err(io)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for a in &self.algorithms {
            for j in 0..a.median.len() {
                w.write_record([a.algorithm.as_str().to_string(), j.to_string(), cell(a.p25[j]), cell(a.median[j]), cell(a.p75[j])])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| SummaryError::Io(e.to_string()))
    }

    /// Writes the JSON report to `path` and the percentile traces next to it
    /// with a `.csv` extension.
    pub fn save(&self, path: &Path) -> Result<(), SummaryError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| SummaryError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| SummaryError::Io(format!("{}: {e}", path.display())))?;
        let csv_path = path.with_extension("csv");
        let file = std::fs::File::create(&csv_path).map_err(|e| SummaryError::Io(format!("{}: {e}", csv_path.display())))?;
        self.write_traces_csv(file)
    }
}
