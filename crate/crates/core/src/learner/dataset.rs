//! Feature matrices with named columns, missing markers, and the
//! fold-local impute/standardize transform.

use serde::{Deserialize, Serialize};

use crate::model::UserId;

/// Feature-set tag per column, for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Ego,
    Call,
    Geo,
    Price,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Ego,
        FeatureGroup::Call,
        FeatureGroup::Geo,
        FeatureGroup::Price,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureGroup::Ego => "ego",
            FeatureGroup::Call => "call",
            FeatureGroup::Geo => "geo",
            FeatureGroup::Price => "price",
        }
    }
}

/// Row-major feature matrix; `f64::NAN` marks a missing value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub y: Vec<u8>,
    pub feature_names: Vec<String>,
    pub groups: Vec<FeatureGroup>,
    pub row_ids: Vec<UserId>,
}

impl Dataset {
    pub fn new(
        n_cols: usize,
        feature_names: Vec<String>,
        groups: Vec<FeatureGroup>,
    ) -> Dataset {
        assert_eq!(feature_names.len(), n_cols);
        assert_eq!(groups.len(), n_cols);
        Dataset {
            x: Vec::new(),
            n_rows: 0,
            n_cols,
            y: Vec::new(),
            feature_names,
            groups,
            row_ids: Vec::new(),
        }
    }

    pub fn push_row(&mut self, id: UserId, row: &[f64], label: u8) {
        assert_eq!(row.len(), self.n_cols);
        self.x.extend_from_slice(row);
        self.y.push(label);
        self.row_ids.push(id);
        self.n_rows += 1;
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.x[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.x[row * self.n_cols..(row + 1) * self.n_cols]
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut out = Dataset::new(
            self.n_cols,
            self.feature_names.clone(),
            self.groups.clone(),
        );
        for &r in rows {
            out.push_row(self.row_ids[r], self.row(r), self.y[r]);
        }
        out
    }

    /// New dataset restricted to the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Dataset {
        let mut out = Dataset::new(
            cols.len(),
            cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            cols.iter().map(|&c| self.groups[c]).collect(),
        );
        for r in 0..self.n_rows {
            let row: Vec<f64> = cols.iter().map(|&c| self.get(r, c)).collect();
            out.push_row(self.row_ids[r], &row, self.y[r]);
        }
        out
    }

    /// Columns belonging to one feature group.
    pub fn group_columns(&self, group: FeatureGroup) -> Vec<usize> {
        (0..self.n_cols).filter(|&c| self.groups[c] == group).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }
}

/// Per-column statistics fitted on training data only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub impute: f64,
    pub mean: f64,
    pub std: f64,
    pub kept: bool,
}

/// Impute-then-standardize transform. Columns that are entirely missing
/// in the training fold are dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transform {
    pub columns: Vec<ColumnTransform>,
    pub dropped: Vec<String>,
}

impl Transform {
    /// Fits imputation means and standardization statistics on `train`.
    /// Constant columns get std 1 so they standardize to 0.
    pub fn fit(train: &Dataset) -> Transform {
        let mut columns = Vec::with_capacity(train.n_cols);
        let mut dropped = Vec::new();
        for c in 0..train.n_cols {
            let present: Vec<f64> = (0..train.n_rows)
                .map(|r| train.get(r, c))
                .filter(|v| !v.is_nan())
                .collect();
            if present.is_empty() {
                dropped.push(train.feature_names[c].clone());
                columns.push(ColumnTransform {
                    impute: 0.0,
                    mean: 0.0,
                    std: 1.0,
                    kept: false,
                });
                continue;
            }
            let impute = present.iter().sum::<f64>() / present.len() as f64;
            // Post-imputation mean/std over all training rows.
            let n = train.n_rows as f64;
            let filled = |r: usize| {
                let v = train.get(r, c);
                if v.is_nan() {
                    impute
                } else {
                    v
                }
            };
            let mean = (0..train.n_rows).map(filled).sum::<f64>() / n;
            let var = (0..train.n_rows)
                .map(|r| (filled(r) - mean).powi(2))
                .sum::<f64>()
                / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            columns.push(ColumnTransform {
                impute,
                mean,
                std,
                kept: true,
            });
        }
        Transform { columns, dropped }
    }

    /// Applies the fitted transform; dropped columns are removed from
    /// the output. Input column layout must match the fitted one.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        assert_eq!(ds.n_cols, self.columns.len(), "column layout mismatch");
        let kept: Vec<usize> = (0..ds.n_cols).filter(|&c| self.columns[c].kept).collect();
        let mut out = Dataset::new(
            kept.len(),
            kept.iter().map(|&c| ds.feature_names[c].clone()).collect(),
            kept.iter().map(|&c| ds.groups[c]).collect(),
        );
        let mut row = Vec::with_capacity(kept.len());
        for r in 0..ds.n_rows {
            row.clear();
            for &c in &kept {
                let t = &self.columns[c];
                let v = ds.get(r, c);
                let v = if v.is_nan() { t.impute } else { v };
                row.push((v - t.mean) / t.std);
            }
            out.push_row(ds.row_ids[r], &row, ds.y[r]);
        }
        out
    }
}
