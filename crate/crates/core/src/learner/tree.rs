//! CART decision tree: Gini impurity for classification, variance for
//! regression, thresholds at midpoints between consecutive distinct values.

use rand::Rng;

use crate::dataset::{Dataset, FeatureRows, Target};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leaf<T> {
    Class(usize),
    Value(T),
}

#[derive(Debug, Clone, PartialEq)]
enum Node<T> {
    Leaf(Leaf<T>),
    /// Rows with `value <= threshold` go left.
    Split { feature: usize, threshold: T, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree<T> {
    nodes: Vec<Node<T>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub mtry: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub n_classes: usize,
}

impl<T: Scalar> DecisionTree<T> {
    /// Single-leaf tree.
    pub fn constant(leaf: Leaf<T>) -> Self {
        Self { nodes: vec![Node::Leaf(leaf)] }
    }

    /// One split on `feature`.
    pub fn stump(feature: usize, threshold: T, left: Leaf<T>, right: Leaf<T>) -> Self {
        Self {
            nodes: vec![
                Node::Split { feature, threshold, left: 1, right: 2 },
                Node::Leaf(left),
                Node::Leaf(right),
            ],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Largest feature index used by any split, if any.
    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf(_) => None,
            })
            .max()
    }

    pub fn leaf_for(&self, rows: &dyn FeatureRows<T>, row: usize) -> Leaf<T> {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(leaf) => return *leaf,
                Node::Split { feature, threshold, left, right } => {
                    i = if rows.value(row, *feature) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Grows a tree on `samples` (row indices into `data`, repeats allowed).
    pub(crate) fn grow<R: Rng + ?Sized>(
        data: &Dataset<T>,
        mut samples: Vec<usize>,
        params: TreeParams,
        rng: &mut R,
    ) -> Self {
        let mut grower = Grower {
            data,
            params,
            rng,
            features: (0..data.n_features()).collect(),
            nodes: Vec::new(),
            order: Vec::with_capacity(samples.len()),
            left_counts: vec![0; params.n_classes],
            right_counts: vec![0; params.n_classes],
        };
        grower.grow_node(&mut samples, 0);
        Self { nodes: grower.nodes }
    }
}

struct Grower<'a, T, R: ?Sized> {
    data: &'a Dataset<T>,
    params: TreeParams,
    rng: &'a mut R,
    features: Vec<usize>,
    nodes: Vec<Node<T>>,
    order: Vec<(T, usize)>,
    left_counts: Vec<usize>,
    right_counts: Vec<usize>,
}

struct SplitCandidate<T> {
    gain: T,
    feature: usize,
    threshold: T,
}

impl<T: Scalar, R: Rng + ?Sized> Grower<'_, T, R> {
    fn grow_node(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let at_limit = samples.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d);
        if !at_limit && !self.is_pure(samples) {
            if let Some(split) = self.best_split(samples) {
                let col = self.data.column(split.feature);
                let (left, right): (Vec<usize>, Vec<usize>) =
                    samples.iter().partition(|&&s| col[s] <= split.threshold);
                let mid = left.len();
                samples[..mid].copy_from_slice(&left);
                samples[mid..].copy_from_slice(&right);

                let index = self.nodes.len();
                self.nodes.push(Node::Leaf(Leaf::Class(0)));
                let (lo, hi) = samples.split_at_mut(mid);
                let left = self.grow_node(lo, depth + 1);
                let right = self.grow_node(hi, depth + 1);
                self.nodes[index] = Node::Split {
                    feature: split.feature,
                    threshold: split.threshold,
                    left,
                    right,
                };
                return index;
            }
        }
        let leaf = self.leaf_value(samples);
        self.nodes.push(Node::Leaf(leaf));
        self.nodes.len() - 1
    }

    fn is_pure(&self, samples: &[usize]) -> bool {
        match self.data.target() {
            Target::Classes(l) => samples.iter().all(|&s| l[s] == l[samples[0]]),
            Target::Values(v) => samples.iter().all(|&s| v[s] == v[samples[0]]),
        }
    }

    fn leaf_value(&self, samples: &[usize]) -> Leaf<T> {
        match self.data.target() {
            Target::Classes(l) => {
                let mut counts = vec![0usize; self.params.n_classes];
                for &s in samples {
                    counts[l[s]] += 1;
                }
                Leaf::Class(argmax_lowest(&counts))
            }
            Target::Values(v) => Leaf::Value(exact_mean(samples.iter().map(|&s| v[s]))),
        }
    }

    /// Visits features in random order until `mtry` non-constant ones have
    /// been scored. Ties in gain go to the lower feature index, then the
    /// lower threshold.
    fn best_split(&mut self, samples: &[usize]) -> Option<SplitCandidate<T>> {
        let w = self.features.len();
        let mut best: Option<SplitCandidate<T>> = None;
        let mut scored = 0;
        let mut i = 0;
        while i < w && scored < self.params.mtry {
            let j = self.rng.gen_range(i..w);
            self.features.swap(i, j);
            let feature = self.features[i];
            i += 1;

            let col = self.data.column(feature);
            self.order.clear();
            self.order.extend(samples.iter().map(|&s| (col[s], s)));
            self.order.sort_unstable_by(|a, b| a.0.order(&b.0));
            if self.order[0].0 == self.order[self.order.len() - 1].0 {
                continue;
            }
            scored += 1;
            let Some((gain, threshold)) = self.sweep() else { continue };
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain
                        || (gain == b.gain
                            && (feature < b.feature || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(SplitCandidate { gain, feature, threshold });
            }
        }
        best
    }

    /// Best (gain, threshold) over the sorted `order` buffer.
    fn sweep(&mut self) -> Option<(T, T)> {
        let n = self.order.len();
        let n_t = T::of_usize(n);
        let mut best: Option<(T, T)> = None;
        let consider = |gain: T, a: T, b: T, best: &mut Option<(T, T)>| {
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                let mut mid = a + (b - a) / (T::one() + T::one());
                if mid >= b {
                    mid = a;
                }
                *best = Some((gain, mid));
            }
        };
        match self.data.target() {
            Target::Classes(labels) => {
                self.left_counts.iter_mut().for_each(|c| *c = 0);
                self.right_counts.iter_mut().for_each(|c| *c = 0);
                for &(_, s) in &self.order {
                    self.right_counts[labels[s]] += 1;
                }
                let mut sq_left = 0usize;
                let mut sq_right: usize = self.right_counts.iter().map(|c| c * c).sum();
                let parent = T::one() - T::of_usize(sq_right) / (n_t * n_t);
                for k in 0..n - 1 {
                    let c = labels[self.order[k].1];
                    sq_left += 2 * self.left_counts[c] + 1;
                    self.left_counts[c] += 1;
                    sq_right -= 2 * self.right_counts[c] - 1;
                    self.right_counts[c] -= 1;
                    let (a, b) = (self.order[k].0, self.order[k + 1].0);
                    if a < b {
                        let nl = T::of_usize(k + 1);
                        let nr = T::of_usize(n - k - 1);
                        let child = T::one()
                            - (T::of_usize(sq_left) / nl + T::of_usize(sq_right) / nr) / n_t;
                        consider(parent - child, a, b, &mut best);
                    }
                }
            }
            Target::Values(values) => {
                let mean = exact_mean(self.order.iter().map(|&(_, s)| values[s]));
                let total: T = self.order.iter().map(|&(_, s)| values[s] - mean).sum();
                let base = total * total / n_t;
                let mut left_sum = T::zero();
                for k in 0..n - 1 {
                    left_sum += values[self.order[k].1] - mean;
                    let (a, b) = (self.order[k].0, self.order[k + 1].0);
                    if a < b {
                        let nl = T::of_usize(k + 1);
                        let nr = T::of_usize(n - k - 1);
                        let right_sum = total - left_sum;
                        let gain = (left_sum * left_sum / nl + right_sum * right_sum / nr - base) / n_t;
                        consider(gain, a, b, &mut best);
                    }
                }
            }
        }
        best
    }
}

/// Index of the largest count; ties go to the lowest index.
pub(crate) fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Mean computed as `first + sum(x - first) / n`, exact when all values agree.
pub(crate) fn exact_mean<T: Scalar>(mut values: impl Iterator<Item = T>) -> T {
    let Some(first) = values.next() else { return T::zero() };
    let (sum, n) = values.fold((T::zero(), 1usize), |(s, n), v| (s + (v - first), n + 1));
    first + sum / T::of_usize(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn params(n_classes: usize) -> TreeParams {
        TreeParams { mtry: usize::MAX, min_samples_split: 2, max_depth: None, n_classes }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax_lowest(&[2, 3, 3]), 1);
        assert_eq!(argmax_lowest(&[1, 1]), 0);
    }

    #[test]
    fn exact_mean_of_constants() {
        assert_eq!(exact_mean([0.1f64; 7].into_iter()), 0.1);
        assert_eq!(exact_mean([1.0f64, 3.0].into_iter()), 2.0);
    }

    #[test]
    fn xor_is_fit_exactly_with_zero_gain_splits() {
        let data = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]],
            Target::Classes(vec![0, 0, 1, 1]),
            vec!["0".into(), "1".into()],
        )
        .unwrap();
        let mut r = rng::stream(0, &[]);
        let tree = DecisionTree::grow(&data, (0..4).collect(), params(2), &mut r);
        for row in 0..4 {
            assert_eq!(tree.leaf_for(&data, row), Leaf::Class(data.target().as_classes().unwrap()[row]));
        }
    }

    #[test]
    fn regression_tree_picks_informative_feature() {
        let x0: Vec<f64> = (0..20).map(f64::from).collect();
        let x1: Vec<f64> = (0..20).map(|i| ((i * 7) % 5) as f64).collect();
        let y: Vec<f64> = x0.iter().map(|&v| if v < 10.0 { 0.0 } else { 5.0 }).collect();
        let data = Dataset::new(vec!["a".into(), "b".into()], vec![x0, x1], Target::Values(y), vec![]).unwrap();
        let mut r = rng::stream(3, &[]);
        let tree = DecisionTree::grow(&data, (0..20).collect(), params(0), &mut r);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.max_feature(), Some(0));
    }

    #[test]
    fn depth_limit_is_respected() {
        let x: Vec<f64> = (0..32).map(f64::from).collect();
        let y: Vec<f64> = (0..32).map(|i| (i * i) as f64).collect();
        let data = Dataset::new(vec!["a".into()], vec![x], Target::Values(y), vec![]).unwrap();
        let mut r = rng::stream(0, &[]);
        let p = TreeParams { max_depth: Some(2), ..params(0) };
        assert_eq!(DecisionTree::grow(&data, (0..32).collect(), p, &mut r).depth(), 2);
    }
}
