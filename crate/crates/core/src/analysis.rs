//! Paired method comparisons and overfitting diagnostics.
//!
//! Two methods are compared with a two-sided Wilcoxon signed-rank test over
//! paired results. Zero differences are dropped and tied magnitudes receive
//! midranks. The p-value is exact for up to [`EXACT_LIMIT`] nonzero pairs and
//! uses a normal approximation with continuity and tie corrections beyond.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::metrics::{Metric, Orientation};

pub const EXACT_LIMIT: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("zero denominator in overfitting ratio")]
    ZeroDenominator,
    #[error("{0} is not a metric with an overfitting measure")]
    NoOverfitKind(Metric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMethod {
    Exact,
    Normal,
    /// No nonzero differences; `p` is 1 by convention.
    NoDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonOutcome {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_value: f64,
    /// Nonzero differences.
    pub n: usize,
    pub method: TestMethod,
}

pub fn wilcoxon_signed_rank(diffs: &[f64]) -> WilcoxonOutcome {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return WilcoxonOutcome {
            statistic: 0.0,
            w_plus: 0.0,
            w_minus: 0.0,
            p_value: 1.0,
            n: 0,
            method: TestMethod::NoDecision,
        };
    }
    let (ranks2, tie_sizes) = doubled_midranks(&nonzero);
    let plus2: u64 = nonzero.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let total2 = (n * (n + 1)) as u64;
    let minus2 = total2 - plus2;
    let stat2 = plus2.min(minus2);
    let (p_value, method) = if n <= EXACT_LIMIT {
        (exact_p(&ranks2, stat2), TestMethod::Exact)
    } else {
        (normal_p(n, stat2 as f64 / 2.0, &tie_sizes), TestMethod::Normal)
    };
    WilcoxonOutcome {
        statistic: stat2 as f64 / 2.0,
        w_plus: plus2 as f64 / 2.0,
        w_minus: minus2 as f64 / 2.0,
        p_value,
        n,
        method,
    }
}

/// Exact two-sided p for the nonzero entries of `diffs`, whatever their
/// count. 1 when all are zero.
pub fn exact_p_value(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return 1.0;
    }
    let (ranks2, _) = doubled_midranks(&nonzero);
    let stat = wilcoxon_signed_rank(&nonzero).statistic;
    exact_p(&ranks2, (stat * 2.0) as u64)
}

/// Normal-approximation two-sided p for the nonzero entries of `diffs`,
/// whatever their count. 1 when all are zero.
pub fn normal_p_value(diffs: &[f64]) -> f64 {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return 1.0;
    }
    let (_, ties) = doubled_midranks(&nonzero);
    normal_p(nonzero.len(), wilcoxon_signed_rank(&nonzero).statistic, &ties)
}

/// Twice the midrank of each `|d|` (always an integer), plus the sizes of
/// tie groups.
fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]].abs() == values[order[i]].abs() {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean; doubled that is i + j + 2.
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided exact p under random signs: `min(1, 2 P(W+ <= w))`, using the
/// distribution of subset sums of the (doubled) ranks.
fn exact_p(ranks2: &[u64], stat2: u64) -> f64 {
    let total: u64 = ranks2.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let below: f64 = counts[..=stat2 as usize].iter().sum();
    let p = 2.0 * below / 2f64.powi(ranks2.len() as i32);
    p.min(1.0)
}

fn normal_p(n: usize, statistic: f64, tie_sizes: &[usize]) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((statistic - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z)).min(1.0)
}

/// Paired results of two methods under one metric, one pair per matched
/// cell (for example dataset and seed).
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub method_a: String,
    pub method_b: String,
    pub metric: Metric,
    pub pairs: Vec<(f64, f64)>,
}

impl PairedSample {
    /// Differences oriented so that positive favors `method_a`.
    pub fn oriented_diffs(&self) -> Vec<f64> {
        let sign = match self.metric.orientation() {
            Orientation::HigherBetter => 1.0,
            Orientation::LowerBetter => -1.0,
        };
        self.pairs.iter().map(|(a, b)| sign * (a - b)).collect()
    }

    pub fn mean_diff(&self) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        self.pairs.iter().map(|(a, b)| a - b).sum::<f64>() / self.pairs.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub method_a: String,
    pub method_b: String,
    pub metric: Metric,
    pub outcome: WilcoxonOutcome,
    /// Mean of `a - b` in metric units.
    pub mean_diff: f64,
    pub winner: Option<String>,
}

impl PairwiseResult {
    /// `p` alone when significant, otherwise `p [mean difference]`.
    pub fn cell(&self, alpha: f64) -> String {
        let p = self.outcome.p_value;
        if p < alpha {
            format!("{p:.4}")
        } else {
            format!("{p:.4} [{:.4}]", self.mean_diff)
        }
    }
}

pub fn pairwise_tests(samples: &[PairedSample], alpha: f64) -> Vec<PairwiseResult> {
    samples
        .par_iter()
        .map(|s| {
            let outcome = wilcoxon_signed_rank(&s.oriented_diffs());
            let winner = if outcome.method != TestMethod::NoDecision
                && outcome.p_value < alpha
                && outcome.w_plus != outcome.w_minus
            {
                Some(if outcome.w_plus > outcome.w_minus { s.method_a.clone() } else { s.method_b.clone() })
            } else {
                None
            };
            PairwiseResult {
                method_a: s.method_a.clone(),
                method_b: s.method_b.clone(),
                metric: s.metric,
                outcome,
                mean_diff: s.mean_diff(),
                winner,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingRow {
    pub method: String,
    pub wins: usize,
    pub losses: usize,
    pub net: i64,
}

/// Win/loss table over all supplied pairs, sorted by net descending, then
/// wins descending, then method name.
pub fn win_loss_ranking(samples: &[PairedSample], alpha: f64) -> Vec<RankingRow> {
    ranking_from(&pairwise_tests(samples, alpha))
}

pub fn ranking_from(results: &[PairwiseResult]) -> Vec<RankingRow> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in results {
        tally.entry(&r.method_a).or_default();
        tally.entry(&r.method_b).or_default();
        if let Some(w) = &r.winner {
            let loser = if *w == r.method_a { &r.method_b } else { &r.method_a };
            tally.get_mut(w.as_str()).unwrap().0 += 1;
            tally.get_mut(loser.as_str()).unwrap().1 += 1;
        }
    }
    let mut rows: Vec<RankingRow> = tally
        .into_iter()
        .map(|(m, (wins, losses))| RankingRow {
            method: m.to_string(),
            wins,
            losses,
            net: wins as i64 - losses as i64,
        })
        .collect();
    rows.sort_by(|a, b| b.net.cmp(&a.net).then(b.wins.cmp(&a.wins)).then(a.method.cmp(&b.method)));
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverfitKind {
    AccRatio,
    BaRatio,
    NrmseRatio,
    R2Diff,
}

impl OverfitKind {
    pub fn for_metric(metric: Metric) -> Result<Self, AnalysisError> {
        match metric {
            Metric::Acc => Ok(OverfitKind::AccRatio),
            Metric::Ba => Ok(OverfitKind::BaRatio),
            Metric::Nrmse => Ok(OverfitKind::NrmseRatio),
            Metric::R2 => Ok(OverfitKind::R2Diff),
            Metric::Rmse => Err(AnalysisError::NoOverfitKind(metric)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OverfitKind::AccRatio => "ACC_train/ACC_test",
            OverfitKind::BaRatio => "BA_train/BA_test",
            OverfitKind::NrmseRatio => "nRMSE_test/nRMSE_train",
            OverfitKind::R2Diff => "R2_train-R2_test",
        }
    }
}

/// ACC and BA: train / test. nRMSE: test / train. R²: train - test.
pub fn overfit_ratio(train: f64, test: f64, kind: OverfitKind) -> Result<f64, AnalysisError> {
    let ratio = |num: f64, den: f64| {
        if den == 0.0 {
            Err(AnalysisError::ZeroDenominator)
        } else {
            Ok(num / den)
        }
    };
    match kind {
        OverfitKind::AccRatio | OverfitKind::BaRatio => ratio(train, test),
        OverfitKind::NrmseRatio => ratio(test, train),
        OverfitKind::R2Diff => Ok(train - test),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitRow {
    pub method: String,
    pub kind: OverfitKind,
    pub value: f64,
}
