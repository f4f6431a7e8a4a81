//! In-repo supervised learning: datasets with missing values,
//! fold-local impute/standardize transforms, stratified k-fold splits,
//! L2-regularized logistic regression, a random forest with Gini
//! importances, and imbalance-aware metrics.

pub mod dataset;
pub mod folds;
pub mod forest;
pub mod logreg;
pub mod metrics;
pub mod model_io;

pub use dataset::{Dataset, FeatureGroup, Transform};
pub use folds::stratified_kfold;
pub use forest::{train_forest, ForestConfig, ForestModel};
pub use logreg::{train_logreg, LinearModel, LogRegConfig};
pub use metrics::{evaluate, Metrics};

use serde::{Deserialize, Serialize};

/// How training weights samples against class imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    Balanced,
}

/// Per-sample weights: 1 everywhere, or inversely proportional to the
/// class frequency (normalized so weights sum to n).
pub fn sample_weights(y: &[u8], weighting: ClassWeighting) -> Vec<f64> {
    match weighting {
        ClassWeighting::None => vec![1.0; y.len()],
        ClassWeighting::Balanced => {
            let n = y.len() as f64;
            let pos = y.iter().filter(|&&v| v == 1).count() as f64;
            let neg = n - pos;
            y.iter()
                .map(|&v| {
                    if v == 1 {
                        n / (2.0 * pos.max(1.0))
                    } else {
                        n / (2.0 * neg.max(1.0))
                    }
                })
                .collect()
        }
    }
}

/// A trained binary classifier of either family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Linear(LinearModel),
    Forest(ForestModel),
}

impl Model {
    /// Positive-class probability per row; input must match the
    /// training column layout.
    pub fn predict_scores(&self, ds: &Dataset) -> Result<Vec<f64>, crate::error::CoreError> {
        match self {
            Model::Linear(m) => m.predict_scores(ds),
            Model::Forest(m) => m.predict_scores(ds),
        }
    }

    /// Class decisions at the 0.5 threshold.
    pub fn predict_labels(&self, ds: &Dataset) -> Result<Vec<u8>, crate::error::CoreError> {
        Ok(self
            .predict_scores(ds)?
            .into_iter()
            .map(|s| u8::from(s >= 0.5))
            .collect())
    }
}

/// Derives a decorrelated child seed for a named component, so every
/// stochastic step draws from its own stream.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 over seed xor stream index
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
