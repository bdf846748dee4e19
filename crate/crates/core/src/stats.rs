//! Wilcoxon rank-sum test, Bonferroni correction and payoff matrices.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::engine::Method;
use crate::error::{Error, Result};
use crate::semantic::SemanticBounds;

/// Pooled sizes up to this use the exact null distribution (when there are
/// no ties).
pub const EXACT_MAX_POOLED: usize = 20;

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = rank;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of `k`-subsets of `{1..=n}` with each possible rank sum.
fn rank_sum_counts(n: usize, k: usize) -> Vec<u64> {
    let max_sum = k * (2 * n - k + 1) / 2;
    // table[j][s]: subsets of size j drawn from the ranks processed so far.
    let mut table = vec![vec![0u64; max_sum + 1]; k + 1];
    table[0][0] = 1;
    for r in 1..=n {
        for j in (1..=k.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                table[j][s] += table[j - 1][s - r];
            }
        }
    }
    table.swap_remove(k)
}

/// Two-sided exact p-value for rank sum `w` of the first sample, given
/// sample sizes and no ties.
pub fn exact_p_value(w: usize, n1: usize, n2: usize) -> f64 {
    let counts = rank_sum_counts(n1 + n2, n1);
    let total: u64 = counts.iter().sum();
    let lower: u64 = counts.iter().take(w + 1).sum();
    let upper: u64 = counts.iter().skip(w).sum();
    ((2 * lower.min(upper)) as f64 / total as f64).min(1.0)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value.
///
/// Small untied samples use the exact permutation distribution; otherwise
/// a normal approximation with tie-corrected variance and continuity
/// correction. A pooled sample with no variation gives `p = 1`.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("rank-sum test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Usage("rank-sum test on NaN data".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();

    if ties.is_empty() && n <= EXACT_MAX_POOLED {
        return Ok(exact_p_value(w as usize, n1, n2));
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (nf * (nf - 1.0));
    let variance = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term);
    if variance <= 0.0 {
        return Ok(1.0);
    }
    let u = w - n1f * (n1f + 1.0) / 2.0;
    let z = ((u - n1f * n2f / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
    Ok(erfc(z / std::f64::consts::SQRT_2).min(1.0))
}

/// Per-comparison significance level after Bonferroni correction.
pub fn bonferroni_threshold(alpha: f64, m: usize) -> f64 {
    alpha / m.max(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    /// Significantly better.
    #[serde(rename = "+")]
    Better,
    /// Significantly worse.
    #[serde(rename = "-")]
    Worse,
    /// Identical samples.
    #[serde(rename = "=")]
    Equal,
    /// No significant difference.
    #[serde(rename = "NSS")]
    NotSignificant,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Better => "+",
            Outcome::Worse => "-",
            Outcome::Equal => "=",
            Outcome::NotSignificant => "NSS",
        })
    }
}

pub fn classify_outcome(p: f64, mean_a: f64, mean_b: f64, threshold: f64) -> Outcome {
    if p < threshold && mean_a > mean_b {
        Outcome::Better
    } else if p < threshold && mean_a < mean_b {
        Outcome::Worse
    } else {
        Outcome::NotSignificant
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOutcome {
    pub outcome: Outcome,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Tests `a` against `b`. Samples that are equal as multisets get `=`.
pub fn compare_samples(a: &[f64], b: &[f64], threshold: f64) -> Result<ComparisonOutcome> {
    let p_value = wilcoxon_rank_sum(a, b)?;
    let (mean_a, mean_b) = (mean(a), mean(b));
    let identical = {
        let mut x = a.to_vec();
        let mut y = b.to_vec();
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        x == y
    };
    let outcome = if identical {
        Outcome::Equal
    } else {
        classify_outcome(p_value, mean_a, mean_b, threshold)
    };
    Ok(ComparisonOutcome {
        outcome,
        p_value,
        mean_a,
        mean_b,
    })
}

/// Hypervolume samples of one method at one bounds setting.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSamples {
    pub method: Method,
    pub bounds: Option<SemanticBounds>,
    pub hv: Vec<f64>,
}

/// `wins[r][c]`: grid cells where method `r` is significantly better than
/// method `c`. The diagonal is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    pub methods: Vec<Method>,
    pub wins: Vec<Vec<Option<usize>>>,
}

pub fn bounds_label(b: &Option<SemanticBounds>) -> String {
    match b {
        None => "-".to_string(),
        Some(b) => format!(
            "lbss={} ubss={}",
            b.lbss.map_or("-".to_string(), |l| l.to_string()),
            b.ubss
        ),
    }
}

/// Builds the win-count matrix for one (algorithm, dataset) pair. The
/// canonical method contributes one sample that is reused against every
/// grid cell; every other method needs a sample for each cell of `grid`.
pub fn payoff_matrix(cells: &[CellSamples], grid: &[SemanticBounds], threshold: f64) -> Result<Payoff> {
    let methods: Vec<Method> = Method::ALL
        .iter()
        .copied()
        .filter(|m| cells.iter().any(|c| c.method == *m))
        .collect();
    let find = |m: Method, g: &SemanticBounds| -> Option<&CellSamples> {
        cells
            .iter()
            .find(|c| c.method == m && (m == Method::Canonical || c.bounds.as_ref() == Some(g)))
    };
    let mut missing = Vec::new();
    for &m in &methods {
        for g in grid {
            if find(m, g).is_none() {
                missing.push(format!("{m} {}", bounds_label(&Some(*g))));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Aggregation { missing });
    }
    let mut wins = vec![vec![None; methods.len()]; methods.len()];
    for (r, &row) in methods.iter().enumerate() {
        for (c, &col) in methods.iter().enumerate() {
            if r == c {
                continue;
            }
            let mut count = 0;
            for g in grid {
                let (a, b) = (find(row, g).unwrap(), find(col, g).unwrap());
                if compare_samples(&a.hv, &b.hv, threshold)?.outcome == Outcome::Better {
                    count += 1;
                }
            }
            wins[r][c] = Some(count);
        }
    }
    Ok(Payoff { methods, wins })
}
