//! Wilcoxon rank-sum (Mann-Whitney U) test and order statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    Empty(&'static str),
    #[error("sample contains NaN")]
    Nan,
}

/// Largest `n_a * n_b` for which the null distribution is enumerated.
pub const EXACT_LIMIT: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSum {
    /// U statistic of the first sample.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn check(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() {
        return Err(StatsError::Empty("a"));
    }
    if b.is_empty() {
        return Err(StatsError::Empty("b"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(StatsError::Nan);
    }
    Ok(())
}

fn pooled_ranks(a: &[f64], b: &[f64]) -> Vec<f64> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    midranks(&pooled)
}

fn u_statistic(ranks: &[f64], na: usize) -> f64 {
    let ra: f64 = ranks[..na].iter().sum();
    ra - (na * (na + 1)) as f64 / 2.0
}

/// Exact two-sided p-value by enumerating every assignment of the pooled
/// midranks to the first sample. Ties are handled exactly because doubled
/// midranks are integers.
pub fn ranksum_exact(a: &[f64], b: &[f64]) -> Result<RankSum, StatsError> {
    check(a, b)?;
    let (na, n) = (a.len(), a.len() + b.len());
    let ranks = pooled_ranks(a, b);
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; na + 1];
    ways[0][0] = 1.0;
    for &d in &doubled {
        for k in (1..=na).rev() {
            let (lo, hi) = ways.split_at_mut(k);
            for s in (d..=max_sum).rev() {
                hi[0][s] += lo[k - 1][s - d];
            }
        }
    }
    let observed: usize = doubled[..na].iter().sum();
    let mean = na * (n + 1);
    let dist = observed.abs_diff(mean);
    let total: f64 = ways[na].iter().sum();
    let tail: f64 = ways[na].iter().enumerate().filter(|(s, _)| s.abs_diff(mean) >= dist).map(|(_, w)| w).sum();
    Ok(RankSum { u: u_statistic(&ranks, na), p: (tail / total).min(1.0), exact: true })
}

/// Normal approximation with tie and continuity corrections.
pub fn ranksum_normal(a: &[f64], b: &[f64]) -> Result<RankSum, StatsError> {
    check(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let ranks = pooled_ranks(a, b);
    let u = u_statistic(&ranks, a.len());
    let mut sorted = ranks.clone();
    sorted.sort_by(f64::total_cmp);
    let ties: f64 = sorted
        .chunk_by(|x, y| x == y)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();
    let var = na * nb / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)).max(1.0));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - na * nb / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - std.cdf(z))).clamp(0.0, 1.0)
    };
    Ok(RankSum { u, p, exact: false })
}

/// Exact when `n_a * n_b <= EXACT_LIMIT`, normal approximation otherwise.
pub fn ranksum(a: &[f64], b: &[f64]) -> Result<RankSum, StatsError> {
    if a.len() * b.len() <= EXACT_LIMIT {
        ranksum_exact(a, b)
    } else {
        ranksum_normal(a, b)
    }
}

/// Linear-interpolation percentile of a sorted slice, `q` in `[0, 1]`.
/// Infinite entries are allowed; equal neighbours never interpolate.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        a
    } else {
        a + (pos - lo as f64) * (b - a)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, 0.5)
}
