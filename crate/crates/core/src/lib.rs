//! Permutation-based subset evaluation for feature selection.
//!
//! A pre-trained model is scored on an evaluation set with a whole subset of
//! columns shuffled at once; the drop in performance is the merit of that
//! subset. A binary NSGA-II searches for subsets that maximize merit while
//! minimizing cardinality. Around that core the crate carries a random forest
//! learner, filter and single-feature permutation baselines, performance
//! metrics, Wilcoxon-based method comparisons and an experiment runner.
//!
//! Numeric modules are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the bottom of this file name the common `f64` instantiations.

pub mod analysis;
pub mod baselines;
pub mod chromosome;
pub mod dataset;
pub mod learner;
pub mod metrics;
pub mod moea;
pub mod permutation;
pub mod rng;
pub mod runner;
pub mod scalar;

pub use chromosome::Chromosome;
pub use dataset::{Dataset, FeatureRows, Partition, SyntheticSpec, Target, Task};
pub use learner::{LearnerSpec, MaxFeatures, Predictor, RandomForest};
pub use metrics::{Metric, MetricValue, Orientation};
pub use moea::{Individual, MoeaConfig, RunTrace, Variant};
pub use permutation::{EvalContext, FeatureScores};
pub use scalar::Scalar;

pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type RandomForest64 = RandomForest<f64>;
pub type RandomForest32 = RandomForest<f32>;
pub type Individual64 = Individual<f64>;
pub type RunTrace64 = RunTrace<f64>;
pub type FeatureScores64 = FeatureScores<f64>;
