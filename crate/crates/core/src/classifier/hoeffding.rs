//! VFDT Hoeffding tree over numeric attributes.
//!
//! Leaves keep per-class Gaussian estimators for every attribute. Every
//! `grace_period` units of weight a leaf evaluates binary splits at evenly
//! spaced candidate thresholds by information gain and splits when the best
//! candidate beats the runner-up by more than the Hoeffding bound (or the
//! bound drops below the tie threshold).

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use thiserror::Error;

use super::{argmax_lowest, OnlineClassifier};
use crate::model::{Point, N_ATTRIBUTES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTreeParams {
    /// δ: one minus the confidence of a split decision.
    pub split_confidence: f64,
    /// Weight a leaf must accumulate between split attempts.
    pub grace_period: f64,
    /// τ: bound below which the two best candidates count as tied.
    pub tie_threshold: f64,
    /// Candidate thresholds per attribute.
    pub n_split_points: usize,
    /// Candidate splits sending less than this share of the weight to either side are ignored.
    pub min_branch_fraction: f64,
    pub leaf_prediction: LeafPrediction,
}

/// How a leaf turns its statistics into a class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafPrediction {
    /// Most frequent class at the leaf.
    MajorityClass,
    /// Gaussian naive Bayes over the leaf's attribute estimators.
    NaiveBayes,
    /// Whichever of the two has been right more often on the examples the leaf has trained on.
    /// This is MOA's default; plain majority leaves never predict a 3% class.
    #[default]
    NaiveBayesAdaptive,
}

impl Default for HoeffdingTreeParams {
    fn default() -> Self {
        Self {
            split_confidence: 1e-7,
            grace_period: 200.0,
            tie_threshold: 0.05,
            n_split_points: 10,
            min_branch_fraction: 0.01,
            leaf_prediction: LeafPrediction::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BoundError {
    #[error("range must be positive, got {0}")]
    Range(f64),
    #[error("confidence must lie in (0, 1], got {0}")]
    Confidence(f64),
    #[error("observation count must be at least 1, got {0}")]
    Count(f64),
}

/// `ε = sqrt(R² ln(1/δ) / (2n))`.
///
/// `δ = 1` is accepted (ε = 0) so the degenerate case can be checked directly.
pub fn hoeffding_bound(range: f64, confidence: f64, n: f64) -> Result<f64, BoundError> {
    if !(range > 0.0) {
        return Err(BoundError::Range(range));
    }
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(BoundError::Confidence(confidence));
    }
    if !(n >= 1.0) {
        return Err(BoundError::Count(n));
    }
    Ok((range * range * (1.0 / confidence).ln() / (2.0 * n)).sqrt())
}

/// Weighted running mean and variance of one attribute for one class.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianEstimator {
    weight: f64,
    mean: f64,
    var_sum: f64,
}

impl GaussianEstimator {
    pub fn add(&mut self, value: f64, weight: f64) {
        if self.weight > 0.0 {
            self.weight += weight;
            let last = self.mean;
            self.mean += weight * (value - last) / self.weight;
            self.var_sum += weight * (value - last) * (value - self.mean);
        } else {
            self.mean = value;
            self.weight = weight;
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.weight > 1.0 {
            self.var_sum / (self.weight - 1.0)
        } else {
            0.0
        }
    }

    fn density(&self, value: f64) -> f64 {
        if self.weight <= 0.0 {
            return 0.0;
        }
        let sd = self.variance().sqrt();
        if sd > 0.0 {
            let z = (value - self.mean) / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        } else if value == self.mean {
            1.0
        } else {
            0.0
        }
    }

    /// Estimated weight below, at, and above `value`.
    pub fn split_weights(&self, value: f64) -> (f64, f64, f64) {
        let equal = self.density(value) * self.weight;
        let sd = self.variance().sqrt();
        let less = if sd > 0.0 {
            normal_cdf((value - self.mean) / sd) * self.weight - equal
        } else if value < self.mean {
            self.weight - equal
        } else {
            0.0
        };
        let greater = (self.weight - equal - less).max(0.0);
        (less, equal, greater)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Per-class Gaussian summary of one numeric attribute at a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NumericObserver {
    estimators: Vec<GaussianEstimator>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl NumericObserver {
    fn new(n_classes: usize) -> Self {
        Self {
            estimators: vec![GaussianEstimator::default(); n_classes],
            min: vec![0.0; n_classes],
            max: vec![0.0; n_classes],
        }
    }

    fn observe(&mut self, value: f64, class: usize, weight: f64) {
        if self.estimators[class].weight() > 0.0 {
            self.min[class] = self.min[class].min(value);
            self.max[class] = self.max[class].max(value);
        } else {
            self.min[class] = value;
            self.max[class] = value;
        }
        self.estimators[class].add(value, weight);
    }

    fn candidates(&self, n: usize) -> Vec<f64> {
        let seen = || (0..self.estimators.len()).filter(|c| self.estimators[*c].weight() > 0.0);
        let lo = seen().map(|c| self.min[c]).fold(f64::INFINITY, f64::min);
        let hi = seen().map(|c| self.max[c]).fold(f64::NEG_INFINITY, f64::max);
        if !(lo < hi) {
            return Vec::new();
        }
        let step = (hi - lo) / (n + 1) as f64;
        (1..=n).map(|i| lo + step * i as f64).filter(|v| *v > lo && *v < hi).collect()
    }

    /// Class weights on the `<=` and `>` sides of `threshold`.
    fn split_distribution(&self, threshold: f64) -> [Vec<f64>; 2] {
        let k = self.estimators.len();
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        for c in 0..k {
            let e = &self.estimators[c];
            if e.weight() <= 0.0 {
                continue;
            }
            if threshold < self.min[c] {
                right[c] += e.weight();
            } else if threshold >= self.max[c] {
                left[c] += e.weight();
            } else {
                let (lt, eq, gt) = e.split_weights(threshold);
                left[c] += lt + eq;
                right[c] += gt;
            }
        }
        [left, right]
    }
}

fn entropy(dist: &[f64]) -> f64 {
    let total: f64 = dist.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -dist
        .iter()
        .filter(|w| **w > 0.0)
        .map(|w| {
            let p = w / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Information gain of splitting `pre` into `post`; `-inf` when fewer than two
/// branches hold at least `min_frac` of the weight.
pub fn info_gain(pre: &[f64], post: &[Vec<f64>], min_frac: f64) -> f64 {
    let total: f64 = post.iter().map(|b| b.iter().sum::<f64>()).sum();
    let big = post.iter().filter(|b| b.iter().sum::<f64>() > min_frac * total).count();
    if big < 2 {
        return f64::NEG_INFINITY;
    }
    let after: f64 = post
        .iter()
        .map(|b| {
            let w: f64 = b.iter().sum();
            if total > 0.0 { w / total * entropy(b) } else { 0.0 }
        })
        .sum();
    entropy(pre) - after
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Leaf {
    class_weights: Vec<f64>,
    observers: Vec<NumericObserver>,
    weight_at_last_eval: f64,
    mc_correct: f64,
    nb_correct: f64,
}

impl Leaf {
    fn new(class_weights: Vec<f64>) -> Self {
        let n = class_weights.len();
        let seen = class_weights.iter().sum();
        Self {
            class_weights,
            observers: (0..N_ATTRIBUTES).map(|_| NumericObserver::new(n)).collect(),
            weight_at_last_eval: seen,
            mc_correct: 0.0,
            nb_correct: 0.0,
        }
    }

    fn majority_class(&self) -> Option<usize> {
        self.class_weights.iter().any(|w| *w > 0.0).then(|| argmax_lowest(&self.class_weights))
    }

    /// Prior times the per-attribute class densities; attributes with no observations are skipped.
    fn naive_bayes(&self, x: &Point) -> Option<usize> {
        let total: f64 = self.weight();
        if total <= 0.0 {
            return None;
        }
        let mut votes: Vec<f64> = self.class_weights.iter().map(|w| w / total).collect();
        for (a, obs) in self.observers.iter().enumerate() {
            if obs.estimators.iter().all(|e| e.weight() <= 0.0) {
                continue;
            }
            for (c, v) in votes.iter_mut().enumerate() {
                *v *= obs.estimators[c].density(x[a]);
            }
        }
        Some(argmax_lowest(&votes))
    }

    fn predict(&self, x: &Point, mode: LeafPrediction) -> Option<usize> {
        match mode {
            LeafPrediction::MajorityClass => self.majority_class(),
            LeafPrediction::NaiveBayes => self.naive_bayes(x),
            LeafPrediction::NaiveBayesAdaptive => {
                if self.mc_correct > self.nb_correct {
                    self.majority_class()
                } else {
                    self.naive_bayes(x)
                }
            }
        }
    }

    fn weight(&self) -> f64 {
        self.class_weights.iter().sum()
    }

    fn is_pure(&self) -> bool {
        self.class_weights.iter().filter(|w| **w > 0.0).count() < 2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Leaf),
    Split { attribute: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
struct SplitCandidate {
    merit: f64,
    attribute: usize,
    threshold: f64,
    branches: [Vec<f64>; 2],
}

/// Incremental VFDT classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTree {
    params: HoeffdingTreeParams,
    n_classes: usize,
    nodes: Vec<Node>,
    /// Class weights over everything trained on; answers for empty leaves.
    seen: Vec<f64>,
}

impl HoeffdingTree {
    pub fn new(n_classes: usize, params: HoeffdingTreeParams) -> Self {
        Self {
            params,
            n_classes,
            nodes: vec![Node::Leaf(Leaf::new(vec![0.0; n_classes]))],
            seen: vec![0.0; n_classes],
        }
    }

    pub fn params(&self) -> &HoeffdingTreeParams {
        &self.params
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, *left).max(rec(nodes, *right)),
            }
        }
        rec(&self.nodes, 0)
    }

    fn leaf_index(&self, x: &Point) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(_) => return i,
                Node::Split { attribute, threshold, left, right } => {
                    i = if x[*attribute] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Trains on one example with weight `weight` (equivalent to `weight` repeated unit updates
    /// of the leaf statistics).
    pub fn train_weighted(&mut self, x: &Point, y: usize, weight: f64) {
        if weight <= 0.0 {
            return;
        }
        self.seen[y] += weight;
        let li = self.leaf_index(x);
        let grace = self.params.grace_period;
        let adaptive = self.params.leaf_prediction == LeafPrediction::NaiveBayesAdaptive;
        let should_try = {
            let Node::Leaf(leaf) = &mut self.nodes[li] else { unreachable!() };
            if adaptive {
                if leaf.majority_class() == Some(y) {
                    leaf.mc_correct += weight;
                }
                if leaf.naive_bayes(x) == Some(y) {
                    leaf.nb_correct += weight;
                }
            }
            leaf.class_weights[y] += weight;
            for (a, obs) in leaf.observers.iter_mut().enumerate() {
                obs.observe(x[a], y, weight);
            }
            let w = leaf.weight();
            if w - leaf.weight_at_last_eval >= grace {
                leaf.weight_at_last_eval = w;
                !leaf.is_pure()
            } else {
                false
            }
        };
        if should_try {
            self.attempt_split(li);
        }
    }

    fn attempt_split(&mut self, li: usize) {
        let Node::Leaf(leaf) = &self.nodes[li] else { return };
        let pre = &leaf.class_weights;
        let min_frac = self.params.min_branch_fraction;
        let mut best: Option<SplitCandidate> = None;
        // the null split (no split) has merit 0 and competes as runner-up
        let mut second_merit = 0.0;
        let mut best_merit = 0.0;
        for (a, obs) in leaf.observers.iter().enumerate() {
            let mut attr_best: Option<SplitCandidate> = None;
            for threshold in obs.candidates(self.params.n_split_points) {
                let branches = obs.split_distribution(threshold);
                let merit = info_gain(pre, &branches, min_frac);
                if attr_best.as_ref().is_none_or(|b| merit > b.merit) {
                    attr_best = Some(SplitCandidate { merit, attribute: a, threshold, branches });
                }
            }
            let Some(cand) = attr_best else { continue };
            if !cand.merit.is_finite() {
                continue;
            }
            if cand.merit > best_merit {
                second_merit = best_merit;
                best_merit = cand.merit;
                best = Some(cand);
            } else if cand.merit > second_merit {
                second_merit = cand.merit;
            }
        }
        let Some(best) = best else { return };

        let range = (self.n_classes.max(2) as f64).log2();
        let eps = hoeffding_bound(range, self.params.split_confidence, leaf.weight()).unwrap_or(f64::INFINITY);
        if best_merit - second_merit > eps || eps < self.params.tie_threshold {
            let [l, r] = best.branches;
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf(Leaf::new(l)));
            self.nodes.push(Node::Leaf(Leaf::new(r)));
            self.nodes[li] = Node::Split { attribute: best.attribute, threshold: best.threshold, left, right: left + 1 };
        }
    }

    fn leaf(&self, x: &Point) -> &Leaf {
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf(l) => l,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Class weights at the leaf `x` falls into.
    pub fn leaf_distribution(&self, x: &Point) -> &[f64] {
        &self.leaf(x).class_weights
    }
}

impl OnlineClassifier for HoeffdingTree {
    fn predict(&self, x: &Point) -> usize {
        // an empty leaf answers with the most frequent class overall (class 0 before any training)
        self.leaf(x).predict(x, self.params.leaf_prediction).unwrap_or_else(|| argmax_lowest(&self.seen))
    }

    fn train(&mut self, x: &Point, y: usize) {
        self.train_weighted(x, y, 1.0);
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn bound_is_zero_at_full_confidence_parameter() {
        for n in [1.0, 10.0, 1e6] {
            assert_eq!(hoeffding_bound(1.0, 1.0, n).unwrap(), 0.0);
        }
    }

    #[test]
    fn bound_direct_arithmetic() {
        // ln(1e7) = 16.11809565..., /2000 = 0.0080590478, sqrt = 0.0897722...
        let e = hoeffding_bound(1.0, 1e-7, 1000.0).unwrap();
        assert!((e - 0.089772).abs() < 1e-5, "{e}");
    }

    #[test]
    fn bound_decreases_with_n() {
        let mut last = f64::INFINITY;
        for n in 1..500 {
            let e = hoeffding_bound(1.585, 1e-7, n as f64).unwrap();
            assert!(e < last);
            last = e;
        }
    }

    #[test]
    fn bound_domain_errors() {
        assert!(matches!(hoeffding_bound(0.0, 0.5, 1.0), Err(BoundError::Range(_))));
        assert!(matches!(hoeffding_bound(1.0, 0.0, 1.0), Err(BoundError::Confidence(_))));
        assert!(matches!(hoeffding_bound(1.0, 1.5, 1.0), Err(BoundError::Confidence(_))));
        assert!(matches!(hoeffding_bound(1.0, 0.5, 0.5), Err(BoundError::Count(_))));
    }

    #[test]
    fn gaussian_estimator_matches_batch_moments() {
        let values = [0.1, 0.4, 0.35, 0.8, 0.2, 0.55];
        let mut g = GaussianEstimator::default();
        for v in values {
            g.add(v, 1.0);
        }
        let mean = values.iter().sum::<f64>() / 6.0;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!((g.mean() - mean).abs() < 1e-12);
        assert!((g.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn weighted_add_equals_repeated_add() {
        let mut a = GaussianEstimator::default();
        let mut b = GaussianEstimator::default();
        for (v, k) in [(0.2, 3), (0.7, 1), (0.4, 5)] {
            a.add(v, k as f64);
            for _ in 0..k {
                b.add(v, 1.0);
            }
        }
        assert!((a.mean() - b.mean()).abs() < 1e-12);
        assert!((a.variance() - b.variance()).abs() < 1e-12);
    }

    #[test]
    fn split_weights_sum_to_total() {
        let mut g = GaussianEstimator::default();
        for v in [0.1, 0.2, 0.3, 0.4] {
            g.add(v, 1.0);
        }
        // the "equal" share is a density times the weight, so only below+equal is a proper mass
        let (l, e, r) = g.split_weights(0.25);
        assert!((l + e + r - 4.0).abs() < 1e-9);
        assert!((l + e - 2.0).abs() < 1e-9 && (r - 2.0).abs() < 1e-9);
    }

    #[test]
    fn info_gain_of_perfect_split() {
        let g = info_gain(&[5.0, 5.0], &[vec![5.0, 0.0], vec![0.0, 5.0]], 0.01);
        assert!((g - 1.0).abs() < 1e-12);
        assert_eq!(info_gain(&[5.0, 5.0], &[vec![5.0, 5.0], vec![0.0, 0.0]], 0.01), f64::NEG_INFINITY);
    }

    #[test]
    fn cold_start_predicts_class_zero() {
        let t = HoeffdingTree::new(3, HoeffdingTreeParams::default());
        assert_eq!(t.predict(&[0.5; 5]), 0);
    }

    #[test]
    fn single_class_feed() {
        let mut t = HoeffdingTree::new(3, HoeffdingTreeParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let x: Point = std::array::from_fn(|_| rng.random());
            t.train(&x, 2);
        }
        assert_eq!(t.n_splits(), 0);
        for _ in 0..100 {
            let x: Point = std::array::from_fn(|_| rng.random());
            assert_eq!(t.predict(&x), 2);
        }
    }

    fn blobs(rng: &mut ChaCha8Rng) -> (Point, usize) {
        let y = rng.random_range(0..2);
        let center = if y == 0 { 0.3 } else { 0.7 };
        let n = Normal::new(center, 0.05).unwrap();
        (std::array::from_fn(|_| n.sample(rng)), y)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let mut t = HoeffdingTree::new(2, HoeffdingTreeParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let (x, y) = blobs(&mut rng);
            t.train(&x, y);
        }
        let correct = (0..1000)
            .filter(|_| {
                let (x, y) = blobs(&mut rng);
                t.predict(&x) == y
            })
            .count();
        assert!(correct > 950, "{correct}");
        assert!(t.n_splits() >= 1);
    }

    #[test]
    fn predict_does_not_mutate() {
        let mut t = HoeffdingTree::new(2, HoeffdingTreeParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let (x, y) = blobs(&mut rng);
            t.train(&x, y);
        }
        let before = t.clone();
        let x = [0.5; 5];
        assert_eq!(t.predict(&x), t.predict(&x));
        assert_eq!(t, before);
    }
}
