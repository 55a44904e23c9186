//! Rank-based significance tests for comparing models across compositions.

use std::collections::HashMap;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Largest block count for which Friedman p-values are enumerated exactly.
pub const FRIEDMAN_EXACT_MAX_BLOCKS: usize = 8;
/// Largest model count for which Friedman p-values are enumerated exactly.
pub const FRIEDMAN_EXACT_MAX_MODELS: usize = 5;
/// Largest non-zero pair count for which Wilcoxon p-values are exact.
pub const WILCOXON_EXACT_MAX: usize = 25;
pub const WILCOXON_MIN_PAIRS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Asymptotic,
    /// No variation at all; p is 1 by definition.
    Degenerate,
}

impl PMethod {
    pub fn name(self) -> &'static str {
        match self {
            PMethod::Exact => "exact",
            PMethod::Asymptotic => "asymptotic",
            PMethod::Degenerate => "degenerate",
        }
    }
}

/// Rows are blocks (compositions), columns are models.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Input(format!(
                "need at least 2 blocks, got {}",
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k < 2 {
            return Err(Error::Input(format!("need at least 2 models, got {k}")));
        }
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != k) {
            return Err(Error::Input(format!(
                "block {i} has {} entries, expected {k}",
                r.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("score matrix holds a non-finite entry".into()));
        }
        Ok(Self { rows })
    }

    pub fn blocks(&self) -> usize {
        self.rows.len()
    }

    pub fn models(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Ascending ranks starting at 1; tied values share their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for g in sorted.chunk_by(|a, b| a == b) {
        let t = g.len() as f64;
        acc += t * t * t - t;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FriedmanResult {
    /// Tie-corrected chi-square statistic.
    pub statistic: f64,
    pub p_value: f64,
    pub method: PMethod,
    /// Mean within-block rank per model; lower is better.
    pub mean_ranks: Vec<f64>,
}

/// Friedman test. p is exact for up to 8 blocks and 5 models, chi-square
/// with `k - 1` degrees of freedom otherwise.
pub fn friedman_test(m: &ScoreMatrix) -> FriedmanResult {
    let exact = m.blocks() <= FRIEDMAN_EXACT_MAX_BLOCKS && m.models() <= FRIEDMAN_EXACT_MAX_MODELS;
    friedman_test_with(
        m,
        if exact {
            PMethod::Exact
        } else {
            PMethod::Asymptotic
        },
    )
}

/// Friedman test with a forced p-value method.
pub fn friedman_test_with(m: &ScoreMatrix, method: PMethod) -> FriedmanResult {
    let n = m.blocks() as f64;
    let k = m.models();
    let kf = k as f64;
    let ranks: Vec<Vec<f64>> = m.rows().iter().map(|r| average_ranks(r)).collect();
    let mut sums = vec![0.0; k];
    for r in &ranks {
        for (s, v) in sums.iter_mut().zip(r) {
            *s += v;
        }
    }
    let mean_ranks = sums.iter().map(|s| s / n).collect();
    let ties: f64 = ranks.iter().map(|r| tie_term(r)).sum();
    let denom = 1.0 - ties / (n * (kf * kf * kf - kf));
    if denom <= 1e-12 {
        log::warn!("every block is fully tied; Friedman p set to 1");
        return FriedmanResult {
            statistic: 0.0,
            p_value: 1.0,
            method: PMethod::Degenerate,
            mean_ranks,
        };
    }
    let ssq: f64 = sums.iter().map(|s| s * s).sum();
    let raw = 12.0 / (n * kf * (kf + 1.0)) * ssq - 3.0 * n * (kf + 1.0);
    let statistic = (raw / denom).max(0.0);
    let p_value = match method {
        PMethod::Exact => friedman_exact_p(&ranks, ssq),
        _ => ChiSquared::new(kf - 1.0)
            .map(|d| d.sf(statistic))
            .unwrap_or(f64::NAN),
    };
    FriedmanResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        method: if method == PMethod::Exact {
            PMethod::Exact
        } else {
            PMethod::Asymptotic
        },
        mean_ranks,
    }
}

fn distinct_permutations(v: &[i64]) -> Vec<Vec<i64>> {
    let mut items = v.to_vec();
    items.sort_unstable();
    let mut out = vec![items.clone()];
    // lexicographic next-permutation over a sorted multiset
    loop {
        let Some(i) = (0..items.len().saturating_sub(1))
            .rev()
            .find(|&i| items[i] < items[i + 1])
        else {
            return out;
        };
        let j = (i + 1..items.len())
            .rev()
            .find(|&j| items[j] > items[i])
            .unwrap();
        items.swap(i, j);
        items[i + 1..].reverse();
        out.push(items.clone());
    }
}

/// P(sum of squared column rank sums >= observed) under independent uniform
/// permutation of each block's ranks. Column labels are exchangeable, so
/// states are kept as sorted sum vectors.
fn friedman_exact_p(ranks: &[Vec<f64>], observed_ssq: f64) -> f64 {
    let k = ranks[0].len();
    let mut states: HashMap<Vec<i64>, f64> = HashMap::from([(vec![0i64; k], 1.0)]);
    for row in ranks {
        let doubled: Vec<i64> = row.iter().map(|r| (2.0 * r).round() as i64).collect();
        let perms = distinct_permutations(&doubled);
        let w = 1.0 / perms.len() as f64;
        let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(states.len() * 4);
        for (s, c) in &states {
            for p in &perms {
                let mut t: Vec<i64> = s.iter().zip(p).map(|(a, b)| a + b).collect();
                t.sort_unstable();
                *next.entry(t).or_insert(0.0) += c * w;
            }
        }
        states = next;
    }
    let target = (4.0 * observed_ssq).round() as i64;
    states
        .iter()
        .filter(|(s, _)| s.iter().map(|v| v * v).sum::<i64>() >= target)
        .map(|(_, c)| c)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// `min(R+, R-)`.
    pub statistic: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Two-sided.
    pub p_value: f64,
    pub method: PMethod,
}

/// Paired two-sided Wilcoxon signed-rank test on `a - b`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(a, b, None)
}

/// As [`wilcoxon_signed_rank`]; `method` forces exact or normal p-values.
pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    method: Option<PMethod>,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "paired samples of {} and {} values",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in paired samples".into()));
    }
    let d: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|v| *v != 0.0)
        .collect();
    if d.is_empty() {
        log::warn!("all paired differences are zero; Wilcoxon p set to 1");
        return Ok(WilcoxonResult {
            statistic: 0.0,
            r_plus: 0.0,
            r_minus: 0.0,
            n: 0,
            p_value: 1.0,
            method: PMethod::Degenerate,
        });
    }
    let n = d.len();
    if n < WILCOXON_MIN_PAIRS {
        return Err(Error::Input(format!(
            "{n} non-zero differences; the signed-rank test needs at least {WILCOXON_MIN_PAIRS}"
        )));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = average_ranks(&abs);
    let r_plus = ranks
        .iter()
        .zip(&d)
        .filter(|(_, v)| **v > 0.0)
        .map(|(r, _)| r)
        .sum::<f64>()
        + 0.0;
    let total = (n * (n + 1)) as f64 / 2.0;
    let r_minus = total - r_plus;
    let statistic = r_plus.min(r_minus);
    let method = method.unwrap_or(if n <= WILCOXON_EXACT_MAX {
        PMethod::Exact
    } else {
        PMethod::Asymptotic
    });
    let p = match method {
        PMethod::Exact => wilcoxon_exact_p(&ranks, statistic),
        _ => {
            let mean = total / 2.0;
            let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_term(&ranks) / 48.0;
            if var <= 0.0 {
                1.0
            } else {
                let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
                2.0 * Normal::standard().sf(z)
            }
        }
    };
    Ok(WilcoxonResult {
        statistic,
        r_plus,
        r_minus,
        n,
        p_value: p.min(1.0),
        method: if method == PMethod::Exact {
            PMethod::Exact
        } else {
            PMethod::Asymptotic
        },
    })
}

/// `2 P(R+ <= statistic)` by counting sign assignments over doubled ranks.
fn wilcoxon_exact_p(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(ranks.len() as i32);
    let limit = (2.0 * statistic).round() as usize;
    let tail: f64 = counts[..=limit.min(max)].iter().sum();
    (2.0 * tail / total).min(1.0)
}

#[cfg(test)]
mod tests;
