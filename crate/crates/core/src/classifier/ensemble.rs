//! Online bagging (OB) and its class-size-aware variants OOB and UOB.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, HoeffdingTree, HoeffdingTreeParams, OnlineClassifier};
use crate::model::Point;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 15;
pub const DEFAULT_DECAY: f64 = 0.9;
pub const DEFAULT_LAMBDA_MAX: f64 = 10.0;

/// Time-decayed class proportions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSizeTracker {
    w: Vec<f64>,
    decay: f64,
    seen: u64,
}

impl ClassSizeTracker {
    pub fn new(n_classes: usize, decay: f64) -> Self {
        Self { w: vec![0.0; n_classes], decay, seen: 0 }
    }

    /// Tracker starting from explicit sizes (normalized on entry).
    pub fn from_sizes(sizes: &[f64], decay: f64) -> Self {
        let total: f64 = sizes.iter().sum();
        Self { w: sizes.iter().map(|s| s / total).collect(), decay, seen: 1 }
    }

    pub fn update(&mut self, y: usize) {
        for (k, w) in self.w.iter_mut().enumerate() {
            *w = self.decay * *w + (1.0 - self.decay) * if k == y { 1.0 } else { 0.0 };
        }
        let total: f64 = self.w.iter().sum();
        if total > 0.0 {
            self.w.iter_mut().for_each(|w| *w /= total);
        }
        self.seen += 1;
    }

    pub fn sizes(&self) -> &[f64] {
        &self.w
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaggingVariant {
    Ob,
    Oob,
    Uob,
}

/// Poisson rate for an example of class `y`, capped at `lambda_max`.
pub fn bagging_lambda(variant: BaggingVariant, tracker: &ClassSizeTracker, y: usize, lambda_max: f64) -> f64 {
    let w = tracker.sizes();
    let wy = w[y];
    let raw = match variant {
        BaggingVariant::Ob => return 1.0,
        BaggingVariant::Oob => w.iter().copied().fold(0.0, f64::max) / wy,
        BaggingVariant::Uob => w.iter().copied().fold(f64::INFINITY, f64::min) / wy,
    };
    if raw.is_nan() {
        1.0
    } else {
        raw.min(lambda_max)
    }
}

/// One draw from Poisson(λ); λ ≤ 0 gives 0.
pub fn poisson(lambda: f64, rng: &mut ChaCha8Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Member {
    tree: HoeffdingTree,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineBagging {
    variant: BaggingVariant,
    n_classes: usize,
    lambda_max: f64,
    tracker: ClassSizeTracker,
    members: Vec<Member>,
}

impl OnlineBagging {
    pub fn new(variant: BaggingVariant, n_classes: usize, params: HoeffdingTreeParams, seed: u64) -> Self {
        Self::with_size(variant, n_classes, params, seed, DEFAULT_ENSEMBLE_SIZE)
    }

    pub fn with_size(
        variant: BaggingVariant,
        n_classes: usize,
        params: HoeffdingTreeParams,
        seed: u64,
        size: usize,
    ) -> Self {
        let members = (0..size)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                Member { tree: HoeffdingTree::new(n_classes, params.clone()), rng }
            })
            .collect();
        Self {
            variant,
            n_classes,
            lambda_max: DEFAULT_LAMBDA_MAX,
            tracker: ClassSizeTracker::new(n_classes, DEFAULT_DECAY),
            members,
        }
    }

    pub fn variant(&self) -> BaggingVariant {
        self.variant
    }

    pub fn tracker(&self) -> &ClassSizeTracker {
        &self.tracker
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> impl Iterator<Item = &HoeffdingTree> {
        self.members.iter().map(|m| &m.tree)
    }

    /// Trains every member with a given Poisson rate, bypassing the tracker.
    pub fn train_with_lambda(&mut self, x: &Point, y: usize, lambda: f64) {
        for m in &mut self.members {
            let k = poisson(lambda, &mut m.rng);
            if k > 0 {
                // k repetitions collapse into one weighted update of the leaf statistics
                m.tree.train_weighted(x, y, k as f64);
            }
        }
    }
}

impl OnlineClassifier for OnlineBagging {
    fn predict(&self, x: &Point) -> usize {
        let mut votes = vec![0.0; self.n_classes];
        for m in &self.members {
            votes[m.tree.predict(x)] += 1.0;
        }
        argmax_lowest(&votes)
    }

    fn train(&mut self, x: &Point, y: usize) {
        self.tracker.update(y);
        let lambda = bagging_lambda(self.variant, &self.tracker, y, self.lambda_max);
        self.train_with_lambda(x, y, lambda);
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }
}
