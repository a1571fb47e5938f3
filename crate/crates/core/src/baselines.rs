//! Feature rankers used as comparison baselines: absolute Pearson
//! correlation, information gain over equal-width bins, and single-feature
//! permutation importance in both evaluation variants.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Partition, Target, Task};
use crate::learner::{self, LearnerError, LearnerSpec};
use crate::permutation::{default_metric, pfi_rank, EvalContext, FeatureScores, PermutationError};
use crate::rng::{self, TAG_PFI};
use crate::scalar::{range, Scalar};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("information gain needs a classification target")]
    NotClassification,
    #[error("bins must be at least 2, got {0}")]
    TooFewBins(usize),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Permutation(#[from] PermutationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankerKind {
    Correlation,
    InfoGain,
    PfiV1,
    PfiV2,
}

impl RankerKind {
    pub fn name(self) -> &'static str {
        match self {
            RankerKind::Correlation => "corr",
            RankerKind::InfoGain => "infogain",
            RankerKind::PfiV1 => "pfi-v1",
            RankerKind::PfiV2 => "pfi-v2",
        }
    }
}

impl std::str::FromStr for RankerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "corr" | "correlation" => Ok(RankerKind::Correlation),
            "infogain" | "info-gain" | "ig" => Ok(RankerKind::InfoGain),
            "pfi-v1" | "pfiv1" => Ok(RankerKind::PfiV1),
            "pfi-v2" | "pfiv2" => Ok(RankerKind::PfiV2),
            other => Err(format!("unknown ranking method `{other}`")),
        }
    }
}

/// Settings shared by [`rank`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankOptions {
    pub learner: LearnerSpec,
    pub pfi_repeats: usize,
    pub bins: usize,
    pub seed: u64,
}

impl Default for RankOptions {
    fn default() -> Self {
        Self { learner: LearnerSpec::default(), pfi_repeats: 5, bins: DEFAULT_BINS, seed: 0 }
    }
}

/// Ranks the features of `d` using only the training and validation rows of
/// `part`. Filter rankers score the merged rows; PFI-V1 fits on training and
/// scores on validation; PFI-V2 fits and scores on the merged rows.
pub fn rank<T: Scalar>(
    kind: RankerKind,
    d: &Dataset<T>,
    part: &Partition,
    opts: &RankOptions,
) -> Result<FeatureScores<T>, BaselineError> {
    let merged = || d.subset(&part.merged());
    match kind {
        RankerKind::Correlation => correlation_rank(&merged()?),
        RankerKind::InfoGain => infogain_rank(&merged()?, opts.bins),
        RankerKind::PfiV1 => pfi_on(&d.subset(&part.train)?, &d.subset(&part.validation)?, opts),
        RankerKind::PfiV2 => {
            let q = merged()?;
            pfi_on(&q, &q, opts)
        }
    }
}

/// Fits the learner on `train` and returns permutation importance on `eval`.
pub fn pfi_on<T: Scalar>(
    train: &Dataset<T>,
    eval: &Dataset<T>,
    opts: &RankOptions,
) -> Result<FeatureScores<T>, BaselineError> {
    let model = learner::fit(&opts.learner, train)?;
    let ctx = EvalContext::new(&model, eval, default_metric(eval.task()))?;
    let mut stream = rng::stream(opts.seed, &[TAG_PFI]);
    Ok(pfi_rank(&ctx, opts.pfi_repeats, &mut stream)?)
}

/// `|pearson(feature, target)|` per feature. Class indices are used as real
/// values for classification targets. Constant features score 0.
pub fn correlation_rank<T: Scalar>(data: &Dataset<T>) -> Result<FeatureScores<T>, BaselineError> {
    let n = data.n_rows();
    if n < 2 {
        return Err(BaselineError::TooFewRows(n));
    }
    let y: Vec<f64> = data.target().to_reals().iter().map(|v| v.as_f64()).collect();
    let scores = data
        .columns()
        .iter()
        .map(|col| {
            let x: Vec<f64> = col.iter().map(|v| v.as_f64()).collect();
            T::of(pearson(&x, &y).abs())
        })
        .collect();
    Ok(FeatureScores::from_scores(scores))
}

/// Pearson correlation; 0 when either side has zero variance.
fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// `H(Y) - H(Y | bin(feature))` in nats, with each feature cut into `bins`
/// equal-width intervals over its observed range.
pub fn infogain_rank<T: Scalar>(data: &Dataset<T>, bins: usize) -> Result<FeatureScores<T>, BaselineError> {
    let classes = match data.target() {
        Target::Classes(c) => c,
        Target::Values(_) => return Err(BaselineError::NotClassification),
    };
    if bins < 2 {
        return Err(BaselineError::TooFewBins(bins));
    }
    let q = data.class_count();
    let h_y = entropy(&class_counts(classes.iter().copied(), q));
    let scores = data
        .columns()
        .iter()
        .map(|col| {
            let Some((lo, hi)) = range(col).filter(|(lo, hi)| hi > lo) else {
                return T::zero();
            };
            let (lo, hi) = (lo.as_f64(), hi.as_f64());
            let width = (hi - lo) / bins as f64;
            let mut table = vec![vec![0usize; q]; bins];
            for (v, &c) in col.iter().zip(classes) {
                let b = (((v.as_f64() - lo) / width) as usize).min(bins - 1);
                table[b][c] += 1;
            }
            let n = classes.len() as f64;
            let h_cond: f64 = table
                .iter()
                .map(|counts| {
                    let m: usize = counts.iter().sum();
                    m as f64 / n * entropy(counts)
                })
                .sum();
            T::of((h_y - h_cond).max(0.0))
        })
        .collect();
    Ok(FeatureScores::from_scores(scores))
}

fn class_counts(labels: impl Iterator<Item = usize>, q: usize) -> Vec<usize> {
    let mut counts = vec![0; q];
    for c in labels {
        counts[c] += 1;
    }
    counts
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Task-dependent sanity check used by callers that want an early error
/// instead of a failure inside [`rank`].
pub fn supports(kind: RankerKind, task: Task) -> bool {
    !(kind == RankerKind::InfoGain && task == Task::Regression)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn regression(columns: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset<f64> {
        let names = (0..columns.len()).map(|i| format!("x{i}")).collect();
        Dataset::new(names, columns, Target::Values(y), Vec::new()).unwrap()
    }

    fn classification(columns: Vec<Vec<f64>>, y: Vec<usize>, q: usize) -> Dataset<f64> {
        let names = (0..columns.len()).map(|i| format!("x{i}")).collect();
        let classes = (0..q).map(|c| c.to_string()).collect();
        Dataset::new(names, columns, Target::Classes(y), classes).unwrap()
    }

    #[test]
    fn correlation_fixtures() {
        let y = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let d = regression(vec![y.clone(), vec![5.0; 5], neg], y);
        let s = correlation_rank(&d).unwrap();
        assert!((s.scores()[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.scores()[1], 0.0);
        assert!((s.scores()[2] - 1.0).abs() < 1e-12);
        assert_eq!(s.ranking(), &[0, 2, 1]);
    }

    #[test]
    fn correlation_needs_two_rows() {
        let d = regression(vec![vec![1.0]], vec![1.0]);
        assert!(matches!(correlation_rank(&d), Err(BaselineError::TooFewRows(1))));
    }

    #[test]
    fn correlation_affine_and_row_order_invariant() {
        let mut rng = rng::stream(5, &[]);
        let x: Vec<f64> = (0..50).map(|_| rng.gen()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 2.0 + rng.gen::<f64>()).collect();
        let scaled: Vec<f64> = x.iter().map(|v| 3.5 * v - 10.0).collect();
        let d = regression(vec![x, scaled], y);
        let s = correlation_rank(&d).unwrap();
        assert!((s.scores()[0] - s.scores()[1]).abs() < 1e-12);

        let mut rows: Vec<usize> = (0..50).collect();
        rows.shuffle(&mut rng);
        let shuffled = correlation_rank(&d.subset(&rows).unwrap()).unwrap();
        for (a, b) in s.scores().iter().zip(shuffled.scores()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn infogain_fixtures() {
        // Feature 0 lands class 0 in the lowest bin and class 1 in the highest.
        let y = vec![0, 0, 1, 1, 0, 1];
        let x0 = vec![0.0, 0.1, 1.0, 0.9, 0.05, 0.95];
        let d = classification(vec![x0, vec![2.0; 6]], y, 2);
        let s = infogain_rank(&d, 10).unwrap();
        assert!((s.scores()[0] - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(s.scores()[1], 0.0);
    }

    #[test]
    fn infogain_independent_feature_is_near_zero() {
        let mut rng = rng::stream(11, &[]);
        let y: Vec<usize> = (0..1000).map(|i| i % 2).collect();
        let x: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
        let d = classification(vec![x], y, 2);
        let s = infogain_rank(&d, 10).unwrap();
        assert!(s.scores()[0] >= 0.0 && s.scores()[0] < 0.01, "{}", s.scores()[0]);
    }

    #[test]
    fn infogain_errors() {
        let d = regression(vec![vec![1.0, 2.0]], vec![1.0, 2.0]);
        assert!(matches!(infogain_rank(&d, 10), Err(BaselineError::NotClassification)));
        let d = classification(vec![vec![1.0, 2.0]], vec![0, 1], 2);
        assert!(matches!(infogain_rank(&d, 1), Err(BaselineError::TooFewBins(1))));
    }

    #[test]
    fn infogain_row_order_invariant() {
        let mut rng = rng::stream(2, &[]);
        let y: Vec<usize> = (0..80).map(|_| rng.gen_range(0..3)).collect();
        let x: Vec<f64> = y.iter().map(|&c| c as f64 + rng.gen::<f64>() * 2.0).collect();
        let d = classification(vec![x], y, 3);
        let mut rows: Vec<usize> = (0..80).collect();
        rows.shuffle(&mut rng);
        let a = infogain_rank(&d, 10).unwrap();
        let b = infogain_rank(&d.subset(&rows).unwrap(), 10).unwrap();
        assert!((a.scores()[0] - b.scores()[0]).abs() < 1e-12);
    }

    #[test]
    fn ranker_names_round_trip() {
        for k in [RankerKind::Correlation, RankerKind::InfoGain, RankerKind::PfiV1, RankerKind::PfiV2] {
            assert_eq!(k.name().parse::<RankerKind>().unwrap(), k);
        }
        assert!(!supports(RankerKind::InfoGain, Task::Regression));
    }
}
