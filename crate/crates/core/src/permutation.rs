//! Permutation-degradation merit of a feature subset, and single-feature
//! permutation importance.
//!
//! The merit of a subset is `|A - B|`, where `A` is the model's score on the
//! evaluation rows and `B` its score after every selected column has been
//! shuffled independently. The absolute value is used for both metric
//! orientations.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::chromosome::Chromosome;
use crate::dataset::{Dataset, DatasetError, ShuffledView, Task};
use crate::learner::{LearnerError, Predictor};
use crate::metrics::{Metric, MetricError};
use crate::rng::{self, TAG_PFI};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PermutationError {
    #[error("chromosome has {got} bits, evaluation data has {expected} features")]
    WidthMismatch { expected: usize, got: usize },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("k = {k} outside 1..={w}")]
    KOutOfRange { k: usize, w: usize },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Metric used for merit: accuracy for classification, RMSE for regression.
pub fn default_metric(task: Task) -> Metric {
    match task {
        Task::Classification => Metric::Acc,
        Task::Regression => Metric::Rmse,
    }
}

/// A fitted model, its evaluation rows, the metric and the cached baseline
/// score on the untouched rows.
pub struct EvalContext<'a, T: Scalar> {
    model: &'a dyn Predictor<T>,
    eval: &'a Dataset<T>,
    metric: Metric,
    baseline: T,
}

impl<'a, T: Scalar> EvalContext<'a, T> {
    pub fn new(model: &'a dyn Predictor<T>, eval: &'a Dataset<T>, metric: Metric) -> Result<Self, PermutationError> {
        if model.n_features() != eval.n_features() {
            return Err(LearnerError::WidthMismatch { expected: model.n_features(), got: eval.n_features() }.into());
        }
        let predicted = model.predict(eval)?;
        let baseline = metric.evaluate(eval.target(), &predicted, eval.class_count())?.value;
        Ok(Self { model, eval, metric, baseline })
    }

    pub fn baseline(&self) -> T {
        self.baseline
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_features(&self) -> usize {
        self.eval.n_features()
    }

    pub fn eval_rows(&self) -> &Dataset<T> {
        self.eval
    }

    fn degradation<R: Rng + ?Sized>(&self, columns: &[usize], rng: &mut R) -> Result<T, PermutationError> {
        let view = ShuffledView::new(self.eval, columns, rng)?;
        let predicted = self.model.predict(&view)?;
        let score = self
            .metric
            .evaluate(self.eval.target(), &predicted, self.eval.class_count())?
            .value;
        Ok((self.baseline - score).abs())
    }
}

/// Merit of subset `x`: one shuffle of every selected column, then the
/// absolute change in score.
pub fn merit<T: Scalar, R: Rng + ?Sized>(
    ctx: &EvalContext<'_, T>,
    x: &Chromosome,
    rng: &mut R,
) -> Result<T, PermutationError> {
    if x.len() != ctx.n_features() {
        return Err(PermutationError::WidthMismatch { expected: ctx.n_features(), got: x.len() });
    }
    ctx.degradation(&x.selected(), rng)
}

/// Mean of `repeats` independent merit draws.
pub fn merit_mc<T: Scalar, R: Rng + ?Sized>(
    ctx: &EvalContext<'_, T>,
    x: &Chromosome,
    repeats: usize,
    rng: &mut R,
) -> Result<T, PermutationError> {
    if repeats == 0 {
        return Err(PermutationError::ZeroRepeats);
    }
    let mut total = T::zero();
    for _ in 0..repeats {
        total += merit(ctx, x, rng)?;
    }
    Ok(total / T::of_usize(repeats))
}

/// Per-feature scores with a ranking by descending score; equal scores are
/// ranked by lower feature index.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScores<T> {
    scores: Vec<T>,
    ranking: Vec<usize>,
}

impl<T: Scalar> FeatureScores<T> {
    pub fn from_scores(scores: Vec<T>) -> Self {
        let mut ranking: Vec<usize> = (0..scores.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].order(&scores[a]).then(a.cmp(&b)));
        Self { scores, ranking }
    }

    pub fn scores(&self) -> &[T] {
        &self.scores
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// The first `k` features of the ranking.
    pub fn select_top_k(&self, k: usize) -> Result<Vec<usize>, PermutationError> {
        let w = self.scores.len();
        if k == 0 || k > w {
            return Err(PermutationError::KOutOfRange { k, w });
        }
        Ok(self.ranking[..k].to_vec())
    }
}

/// Single-feature permutation importance: for each feature, the mean over
/// `repeats` of `|A - B_i|` with only that column shuffled.
///
/// One seed is drawn from `rng`; each feature then gets its own derived
/// stream, so features are scored in parallel without affecting results.
pub fn pfi_rank<T: Scalar, R: Rng + ?Sized>(
    ctx: &EvalContext<'_, T>,
    repeats: usize,
    rng: &mut R,
) -> Result<FeatureScores<T>, PermutationError> {
    if repeats == 0 {
        return Err(PermutationError::ZeroRepeats);
    }
    let seed: u64 = rng.gen();
    let scores = (0..ctx.n_features())
        .into_par_iter()
        .map(|feature| {
            let mut stream = rng::stream(seed, &[TAG_PFI, feature as u64]);
            let mut total = T::zero();
            for _ in 0..repeats {
                total += ctx.degradation(&[feature], &mut stream)?;
            }
            Ok(total / T::of_usize(repeats))
        })
        .collect::<Result<Vec<T>, PermutationError>>()?;
    Ok(FeatureScores::from_scores(scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureRows, Target};
    use crate::learner::{DecisionTree, Leaf, RandomForest};

    fn stump_fixture() -> (RandomForest<f64>, Dataset<f64>) {
        // Feature 0 decides the class; feature 1 is noise.
        let x0 = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x1 = vec![5.0, 3.0, 1.0, 2.0, 4.0, 6.0];
        let data = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![x0, x1],
            Target::Classes(vec![0, 0, 0, 1, 1, 1]),
            vec!["n".into(), "p".into()],
        )
        .unwrap();
        let stump = DecisionTree::stump(0, 0.5, Leaf::Class(0), Leaf::Class(1));
        (RandomForest::from_trees(Task::Classification, 2, 2, vec![stump]).unwrap(), data)
    }

    struct Constant;

    impl Predictor<f64> for Constant {
        fn task(&self) -> Task {
            Task::Regression
        }
        fn n_features(&self) -> usize {
            2
        }
        fn predict(&self, rows: &dyn FeatureRows<f64>) -> Result<Target<f64>, LearnerError> {
            Ok(Target::Values(vec![1.0; rows.n_rows()]))
        }
    }

    #[test]
    fn empty_subset_has_zero_merit() {
        let (model, data) = stump_fixture();
        let ctx = EvalContext::new(&model, &data, Metric::Acc).unwrap();
        assert_eq!(ctx.baseline(), 1.0);
        let mut r = rng::stream(1, &[]);
        assert_eq!(merit(&ctx, &Chromosome::zeros(2), &mut r).unwrap(), 0.0);
        assert_eq!(merit_mc(&ctx, &Chromosome::zeros(2), 7, &mut r).unwrap(), 0.0);
    }

    #[test]
    fn constant_model_has_zero_merit() {
        let data = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]],
            Target::Values(vec![0.0, 1.0, 5.0]),
            vec![],
        )
        .unwrap();
        let ctx = EvalContext::new(&Constant, &data, Metric::Rmse).unwrap();
        let mut r = rng::stream(2, &[]);
        assert_eq!(merit(&ctx, &Chromosome::ones(2), &mut r).unwrap(), 0.0);
        let scores = pfi_rank(&ctx, 3, &mut r).unwrap();
        assert_eq!(scores.scores(), &[0.0, 0.0]);
    }

    #[test]
    fn stump_merit_matches_hand_scored_permutation() {
        let (model, data) = stump_fixture();
        let ctx = EvalContext::new(&model, &data, Metric::Acc).unwrap();
        let x = Chromosome::from_indices(2, &[0]);
        let mut r = rng::stream(17, &[]);
        let got = merit(&ctx, &x, &mut r).unwrap();

        // Reproduce the draw: shuffling column 0 alone with the same stream.
        let mut r = rng::stream(17, &[]);
        let shuffled = crate::dataset::shuffle_column(&data, 0, &mut r).unwrap();
        let labels = data.target().as_classes().unwrap();
        let hits = (0..6)
            .filter(|&i| usize::from(shuffled.column(0)[i] > 0.5) == labels[i])
            .count();
        assert_eq!(got, (1.0 - hits as f64 / 6.0).abs());
    }

    #[test]
    fn pfi_scores_the_used_feature_only() {
        let (model, data) = stump_fixture();
        let ctx = EvalContext::new(&model, &data, Metric::Acc).unwrap();
        let before = data.clone();
        let mut r = rng::stream(4, &[]);
        let scores = pfi_rank(&ctx, 5, &mut r).unwrap();
        assert!(scores.scores()[0] > 0.0);
        assert_eq!(scores.scores()[1], 0.0);
        assert_eq!(scores.ranking(), &[0, 1]);
        assert_eq!(data, before);
    }

    #[test]
    fn top_k_and_tie_rule() {
        let s = FeatureScores::from_scores(vec![0.3, 0.9, 0.9]);
        let mut top = s.select_top_k(2).unwrap();
        top.sort_unstable();
        assert_eq!(top, vec![1, 2]);
        assert_eq!(s.select_top_k(1).unwrap(), vec![1]);
        assert_eq!(s.select_top_k(3).unwrap().len(), 3);
        assert!(s.select_top_k(0).is_err());
        assert!(s.select_top_k(4).is_err());
    }

    #[test]
    fn errors() {
        let (model, data) = stump_fixture();
        let ctx = EvalContext::new(&model, &data, Metric::Acc).unwrap();
        let mut r = rng::stream(0, &[]);
        assert!(matches!(
            merit(&ctx, &Chromosome::zeros(3), &mut r),
            Err(PermutationError::WidthMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(
            merit_mc(&ctx, &Chromosome::zeros(2), 0, &mut r),
            Err(PermutationError::ZeroRepeats)
        ));
    }

    #[test]
    fn merit_mc_with_one_repeat_equals_merit() {
        let (model, data) = stump_fixture();
        let ctx = EvalContext::new(&model, &data, Metric::Acc).unwrap();
        let x = Chromosome::ones(2);
        let a = merit(&ctx, &x, &mut rng::stream(9, &[])).unwrap();
        let b = merit_mc(&ctx, &x, 1, &mut rng::stream(9, &[])).unwrap();
        assert_eq!(a, b);
    }
}
