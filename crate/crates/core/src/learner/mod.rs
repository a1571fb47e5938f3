//! Supervised learner contract and the in-crate random forest.
//!
//! Feature selection only ever needs a fitted model that can score rows, so
//! the rest of the crate talks to [`Predictor`] and never to a concrete
//! learner.

mod forest;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureRows, Target, Task};
use crate::scalar::Scalar;

pub use forest::RandomForest;
pub use tree::{DecisionTree, Leaf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid learner spec: {0}")]
    InvalidSpec(String),
    #[error("rows have {got} features, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

/// A fitted model.
pub trait Predictor<T: Scalar>: Send + Sync {
    fn task(&self) -> Task;

    /// Number of features every input row must have.
    fn n_features(&self) -> usize;

    /// Predicts class indices or values for every row.
    fn predict(&self, rows: &dyn FeatureRows<T>) -> Result<Target<T>, LearnerError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    #[default]
    RandomForest,
}

/// Number of candidate features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Third,
    All,
    Fixed(usize),
}

impl MaxFeatures {
    pub fn default_for(task: Task) -> Self {
        match task {
            Task::Classification => MaxFeatures::Sqrt,
            Task::Regression => MaxFeatures::Third,
        }
    }

    pub fn resolve(self, w: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (w as f64).sqrt() as usize,
            MaxFeatures::Third => w / 3,
            MaxFeatures::All => w,
            MaxFeatures::Fixed(k) => k,
        };
        k.clamp(1, w.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub n_trees: usize,
    /// `None` picks `Sqrt` for classification and `Third` for regression.
    pub max_features: Option<MaxFeatures>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        Self {
            kind: LearnerKind::RandomForest,
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl LearnerSpec {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self, w: usize) -> Result<(), LearnerError> {
        if self.n_trees == 0 {
            return Err(LearnerError::InvalidSpec("n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(LearnerError::InvalidSpec("min_samples_split must be at least 2".into()));
        }
        if let Some(MaxFeatures::Fixed(k)) = self.max_features {
            if k == 0 || k > w {
                return Err(LearnerError::InvalidSpec(format!("max_features {k} outside 1..={w}")));
            }
        }
        Ok(())
    }
}

/// Trains the learner described by `spec` on `data`.
pub fn fit<T: Scalar>(spec: &LearnerSpec, data: &Dataset<T>) -> Result<RandomForest<T>, LearnerError> {
    match spec.kind {
        LearnerKind::RandomForest => RandomForest::fit(spec, data),
    }
}

pub(crate) fn check_width<T>(expected: usize, rows: &dyn FeatureRows<T>) -> Result<(), LearnerError> {
    let got = rows.n_features();
    if got != expected && rows.n_rows() > 0 {
        return Err(LearnerError::WidthMismatch { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_features_resolution() {
        assert_eq!(MaxFeatures::Sqrt.resolve(100), 10);
        assert_eq!(MaxFeatures::Third.resolve(200), 66);
        assert_eq!(MaxFeatures::Third.resolve(2), 1);
        assert_eq!(MaxFeatures::All.resolve(7), 7);
        assert_eq!(MaxFeatures::Fixed(3).resolve(7), 3);
    }

    #[test]
    fn spec_validation() {
        let ok = LearnerSpec::default();
        assert!(ok.validate(5).is_ok());
        assert!(LearnerSpec { n_trees: 0, ..ok.clone() }.validate(5).is_err());
        assert!(LearnerSpec { max_features: Some(MaxFeatures::Fixed(6)), ..ok.clone() }.validate(5).is_err());
        assert!(LearnerSpec { max_features: Some(MaxFeatures::Fixed(0)), ..ok.clone() }.validate(5).is_err());
        assert!(LearnerSpec { min_samples_split: 1, ..ok }.validate(5).is_err());
    }
}
