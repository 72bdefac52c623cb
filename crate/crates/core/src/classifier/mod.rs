//! Online classifiers under the predict-then-train contract.

mod ensemble;
mod hoeffding;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{
    bagging_lambda, poisson, BaggingVariant, ClassSizeTracker, OnlineBagging, DEFAULT_DECAY, DEFAULT_ENSEMBLE_SIZE,
    DEFAULT_LAMBDA_MAX,
};
pub use hoeffding::{
    hoeffding_bound, info_gain, BoundError, GaussianEstimator, HoeffdingTree, HoeffdingTreeParams, LeafPrediction,
};

use crate::model::Point;

pub trait OnlineClassifier {
    /// Predicted class index. Never mutates the model.
    fn predict(&self, x: &Point) -> usize;
    /// Consumes one labeled example.
    fn train(&mut self, x: &Point, y: usize);
    fn n_classes(&self) -> usize;
}

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Vfdt,
    Ob,
    Oob,
    Uob,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [Self::Vfdt, Self::Ob, Self::Oob, Self::Uob];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Vfdt => "vfdt",
            Self::Ob => "ob",
            Self::Oob => "oob",
            Self::Uob => "uob",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown classifier {0:?} (expected vfdt, ob, oob or uob)")]
pub struct UnknownClassifier(pub String);

impl FromStr for ClassifierKind {
    type Err = UnknownClassifier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownClassifier(s.to_string()))
    }
}

/// Any of the four learners, with a serializable state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    Vfdt(HoeffdingTree),
    Bagging(OnlineBagging),
}

const BLOB_MAGIC: &[u8; 4] = b"IMBC";
const BLOB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("not a classifier checkpoint")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u16),
    #[error("corrupt checkpoint: {0}")]
    Decode(#[from] serde_json::Error),
}

impl Classifier {
    /// Default-parameter learner; `seed` drives the ensemble's Poisson draws.
    pub fn new(kind: ClassifierKind, n_classes: usize, seed: u64) -> Self {
        let params = HoeffdingTreeParams::default();
        match kind {
            ClassifierKind::Vfdt => Self::Vfdt(HoeffdingTree::new(n_classes, params)),
            ClassifierKind::Ob => Self::Bagging(OnlineBagging::new(BaggingVariant::Ob, n_classes, params, seed)),
            ClassifierKind::Oob => Self::Bagging(OnlineBagging::new(BaggingVariant::Oob, n_classes, params, seed)),
            ClassifierKind::Uob => Self::Bagging(OnlineBagging::new(BaggingVariant::Uob, n_classes, params, seed)),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Vfdt(_) => ClassifierKind::Vfdt,
            Self::Bagging(b) => match b.variant() {
                BaggingVariant::Ob => ClassifierKind::Ob,
                BaggingVariant::Oob => ClassifierKind::Oob,
                BaggingVariant::Uob => ClassifierKind::Uob,
            },
        }
    }

    /// Versioned opaque checkpoint.
    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = BLOB_MAGIC.to_vec();
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        out.extend(serde_json::to_vec(self).expect("classifier state serializes"));
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self, BlobError> {
        if bytes.len() < 6 || &bytes[..4] != BLOB_MAGIC {
            return Err(BlobError::Magic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != BLOB_VERSION {
            return Err(BlobError::Version(version));
        }
        Ok(serde_json::from_slice(&bytes[6..])?)
    }
}

impl OnlineClassifier for Classifier {
    fn predict(&self, x: &Point) -> usize {
        match self {
            Self::Vfdt(t) => t.predict(x),
            Self::Bagging(b) => b.predict(x),
        }
    }

    fn train(&mut self, x: &Point, y: usize) {
        match self {
            Self::Vfdt(t) => t.train(x, y),
            Self::Bagging(b) => b.train(x, y),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Self::Vfdt(t) => t.n_classes(),
            Self::Bagging(b) => b.n_classes(),
        }
    }
}
