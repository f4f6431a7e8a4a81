//! Versioned model serialization: feature names, the fitted transform,
//! and the trained model in one JSON document.

use serde::{Deserialize, Serialize};

use super::{Dataset, Model, Transform};
use crate::error::CoreError;

const FORMAT_VERSION: u32 = 1;

/// A trained model bundled with everything needed to score raw feature
/// rows: the column names it expects and the impute/standardize
/// transform fitted on its training fold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub transform: Transform,
    pub model: Model,
}

impl SavedModel {
    pub fn new(feature_names: Vec<String>, transform: Transform, model: Model) -> SavedModel {
        SavedModel {
            version: FORMAT_VERSION,
            feature_names,
            transform,
            model,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<SavedModel, CoreError> {
        let saved: SavedModel =
            serde_json::from_str(text).map_err(|e| CoreError::ModelFormat(e.to_string()))?;
        if saved.version != FORMAT_VERSION {
            return Err(CoreError::ModelFormat(format!(
                "unsupported model version {}",
                saved.version
            )));
        }
        Ok(saved)
    }

    /// Transforms raw rows and scores them.
    pub fn score(&self, raw: &Dataset) -> Result<Vec<f64>, CoreError> {
        let transformed = self.transform.apply(raw);
        self.model.predict_scores(&transformed)
    }
}
