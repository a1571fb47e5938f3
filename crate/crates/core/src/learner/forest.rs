use rand::Rng;
use rayon::prelude::*;

use super::tree::{argmax_lowest, exact_mean, DecisionTree, Leaf, TreeParams};
use super::{check_width, LearnerError, LearnerSpec, MaxFeatures, Predictor};
use crate::dataset::{Dataset, FeatureRows, Target, Task};
use crate::rng::{self, TAG_TREE};
use crate::scalar::Scalar;

/// Bagged ensemble of CART trees. Classification takes a majority vote
/// (ties to the lowest class index); regression averages tree outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest<T> {
    task: Task,
    n_features: usize,
    n_classes: usize,
    trees: Vec<DecisionTree<T>>,
}

impl<T: Scalar> RandomForest<T> {
    /// Each tree draws from its own stream keyed by `(seed, tree index)`, so
    /// the fitted forest does not depend on how trees are scheduled.
    pub fn fit(spec: &LearnerSpec, data: &Dataset<T>) -> Result<Self, LearnerError> {
        let n = data.n_rows();
        let w = data.n_features();
        if n == 0 || w == 0 {
            return Err(LearnerError::EmptyTrainingSet);
        }
        spec.validate(w)?;
        let task = data.task();
        let params = TreeParams {
            mtry: spec.max_features.unwrap_or(MaxFeatures::default_for(task)).resolve(w),
            min_samples_split: spec.min_samples_split,
            max_depth: spec.max_depth,
            n_classes: data.class_count(),
        };
        let trees = (0..spec.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::stream(spec.seed, &[TAG_TREE, t as u64]);
                let samples = if spec.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::grow(data, samples, params, &mut rng)
            })
            .collect();
        Ok(Self { task, n_features: w, n_classes: data.class_count(), trees })
    }

    /// Assembles a forest from prebuilt trees.
    pub fn from_trees(
        task: Task,
        n_features: usize,
        n_classes: usize,
        trees: Vec<DecisionTree<T>>,
    ) -> Result<Self, LearnerError> {
        if trees.is_empty() {
            return Err(LearnerError::InvalidSpec("a forest needs at least one tree".into()));
        }
        if trees.iter().filter_map(DecisionTree::max_feature).any(|f| f >= n_features) {
            return Err(LearnerError::InvalidSpec("tree splits on a feature beyond n_features".into()));
        }
        Ok(Self { task, n_features, n_classes, trees })
    }

    pub fn trees(&self) -> &[DecisionTree<T>] {
        &self.trees
    }
}

impl<T: Scalar> Predictor<T> for RandomForest<T> {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, rows: &dyn FeatureRows<T>) -> Result<Target<T>, LearnerError> {
        check_width(self.n_features, rows)?;
        let n = rows.n_rows();
        match self.task {
            Task::Classification => {
                let mut votes = vec![0usize; self.n_classes.max(1)];
                let out = (0..n)
                    .map(|row| {
                        votes.iter_mut().for_each(|v| *v = 0);
                        for tree in &self.trees {
                            if let Leaf::Class(c) = tree.leaf_for(rows, row) {
                                if c >= votes.len() {
                                    votes.resize(c + 1, 0);
                                }
                                votes[c] += 1;
                            }
                        }
                        argmax_lowest(&votes)
                    })
                    .collect();
                Ok(Target::Classes(out))
            }
            Task::Regression => {
                let out = (0..n)
                    .map(|row| {
                        exact_mean(self.trees.iter().map(|tree| match tree.leaf_for(rows, row) {
                            Leaf::Value(v) => v,
                            Leaf::Class(c) => T::of_usize(c),
                        }))
                    })
                    .collect();
                Ok(Target::Values(out))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RowMajor;
    use crate::learner::fit;

    fn two_rows() -> Dataset<f64> {
        Dataset::new(
            vec!["a".into()],
            vec![vec![0.0, 1.0]],
            Target::Classes(vec![1, 0]),
            vec!["x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn constant_target_gives_constant_prediction() {
        let data = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![(0..30).map(f64::from).collect(), (0..30).map(|i| f64::from(i % 4)).collect()],
            Target::Values(vec![0.1; 30]),
            vec![],
        )
        .unwrap();
        let m = fit(&LearnerSpec { n_trees: 10, ..Default::default() }, &data).unwrap();
        let probe = vec![vec![-5.0, 2.0], vec![100.0, 0.5]];
        assert_eq!(m.predict(&RowMajor(&probe)).unwrap(), Target::Values(vec![0.1, 0.1]));
    }

    #[test]
    fn single_tree_separates_two_rows() {
        let spec = LearnerSpec {
            n_trees: 1,
            bootstrap: false,
            max_features: Some(MaxFeatures::All),
            ..Default::default()
        };
        let data = two_rows();
        let m = fit(&spec, &data).unwrap();
        assert_eq!(m.predict(&data).unwrap(), data.target().clone());
    }

    #[test]
    fn fit_is_deterministic() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64).collect();
        let x2: Vec<f64> = (0..60).map(|i| ((i * 11) % 7) as f64).collect();
        let y: Vec<f64> = x.iter().zip(&x2).map(|(a, b)| a * 0.5 - b).collect();
        let data = Dataset::new(vec!["a".into(), "b".into()], vec![x, x2], Target::Values(y), vec![]).unwrap();
        let spec = LearnerSpec { n_trees: 16, seed: 5, ..Default::default() };
        let a = fit(&spec, &data).unwrap();
        let b = fit(&spec, &data).unwrap();
        assert_eq!(a, b);
        let pa = a.predict(&data).unwrap();
        let pb = b.predict(&data).unwrap();
        let bits = |t: &Target<f64>| t.as_values().unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&pa), bits(&pb));
    }

    #[test]
    fn vote_and_mean_rules() {
        let same = vec![DecisionTree::constant(Leaf::Class(2)); 3];
        let f = RandomForest::<f64>::from_trees(Task::Classification, 1, 3, same).unwrap();
        assert_eq!(f.predict(&RowMajor(&[vec![0.0]])).unwrap(), Target::Classes(vec![2]));

        let tie = vec![DecisionTree::constant(Leaf::Class(1)), DecisionTree::constant(Leaf::Class(0))];
        let f = RandomForest::<f64>::from_trees(Task::Classification, 1, 2, tie).unwrap();
        assert_eq!(f.predict(&RowMajor(&[vec![0.0]])).unwrap(), Target::Classes(vec![0]));

        let reg = vec![DecisionTree::constant(Leaf::Value(1.0)), DecisionTree::constant(Leaf::Value(3.0))];
        let f = RandomForest::from_trees(Task::Regression, 1, 0, reg).unwrap();
        assert_eq!(f.predict(&RowMajor(&[vec![0.0]])).unwrap(), Target::Values(vec![2.0]));
    }

    #[test]
    fn width_mismatch_and_empty_errors() {
        let data = two_rows();
        let m = fit(&LearnerSpec { n_trees: 2, ..Default::default() }, &data).unwrap();
        assert_eq!(
            m.predict(&RowMajor(&[vec![0.0, 1.0]])),
            Err(LearnerError::WidthMismatch { expected: 1, got: 2 })
        );
        assert!(RandomForest::<f64>::from_trees(Task::Regression, 1, 0, vec![]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let data = Dataset::<f32>::new(
            vec!["a".into()],
            vec![vec![0.0, 1.0, 2.0, 3.0]],
            Target::Values(vec![0.0, 0.0, 1.0, 1.0]),
            vec![],
        )
        .unwrap();
        let spec = LearnerSpec { n_trees: 1, bootstrap: false, ..Default::default() };
        let m = fit(&spec, &data).unwrap();
        assert_eq!(m.predict(&data).unwrap(), data.target().clone());
    }
}
