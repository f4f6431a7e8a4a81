//! Random forest classifier grown on bootstrap samples with random
//! feature subsets, tracking per-feature Gini impurity decrease.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{child_seed, sample_weights, ClassWeighting, Dataset};
use crate::error::CoreError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means floor(sqrt(p)).
    pub features_per_split: Option<usize>,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 6,
            min_leaf: 10,
            features_per_split: None,
            class_weighting: ClassWeighting::Balanced,
            seed: 0,
        }
    }
}

/// Flat node array; `feature < 0` marks a leaf carrying the weighted
/// positive-class probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature < 0 {
                return n.prob;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    /// Mean impurity decrease per feature, normalized to sum to 1
    /// (all zeros when no split was ever made).
    pub importances: Vec<f64>,
    pub n_features: usize,
}

struct TreeBuilder<'a> {
    ds: &'a Dataset,
    weights: &'a [f64],
    cfg: &'a ForestConfig,
    nodes: Vec<TreeNode>,
    importance: Vec<f64>,
    root_weight: f64,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

fn gini(w_pos: f64, w_total: f64) -> f64 {
    if w_total <= 0.0 {
        return 0.0;
    }
    let p = w_pos / w_total;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

impl<'a> TreeBuilder<'a> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let w_total: f64 = idx.iter().map(|&i| self.weights[i]).sum();
        let w_pos: f64 = idx
            .iter()
            .filter(|&&i| self.ds.y[i] == 1)
            .map(|&i| self.weights[i])
            .sum();
        let node_gini = gini(w_pos, w_total);
        let prob = if w_total > 0.0 { w_pos / w_total } else { 0.5 };
        let make_leaf = |nodes: &mut Vec<TreeNode>| {
            nodes.push(TreeNode {
                feature: -1,
                threshold: 0.0,
                left: 0,
                right: 0,
                prob,
            });
            (nodes.len() - 1) as u32
        };
        if depth >= self.cfg.max_depth
            || node_gini == 0.0
            || idx.len() < 2 * self.cfg.min_leaf
            || idx.len() < 2
        {
            return make_leaf(&mut self.nodes);
        }
        let Some(best) = self.best_split(idx, node_gini, w_total, rng) else {
            return make_leaf(&mut self.nodes);
        };
        self.importance[best.feature] += (w_total / self.root_weight) * best.decrease;
        // Partition indices in place around the threshold.
        let mid = partition(idx, |i| {
            self.ds.get(i, best.feature) <= best.threshold
        });
        let node_pos = self.nodes.len();
        self.nodes.push(TreeNode {
            feature: best.feature as i32,
            threshold: best.threshold,
            left: 0,
            right: 0,
            prob,
        });
        let (left_idx, right_idx) = idx.split_at_mut(mid);
        let left = self.grow(left_idx, depth + 1, rng);
        let right = self.grow(right_idx, depth + 1, rng);
        self.nodes[node_pos].left = left;
        self.nodes[node_pos].right = right;
        node_pos as u32
    }

    fn best_split(
        &self,
        idx: &[usize],
        node_gini: f64,
        w_total: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<BestSplit> {
        let p = self.ds.n_cols;
        let m = self
            .cfg
            .features_per_split
            .unwrap_or_else(|| (p as f64).sqrt().floor().max(1.0) as usize)
            .min(p);
        let features = sample_distinct(p, m, rng);
        let mut best: Option<BestSplit> = None;
        let mut col: Vec<(f64, f64, f64)> = Vec::with_capacity(idx.len());
        for f in features {
            col.clear();
            for &i in idx {
                let w = self.weights[i];
                let wp = if self.ds.y[i] == 1 { w } else { 0.0 };
                col.push((self.ds.get(i, f), w, wp));
            }
            col.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut wl = 0.0;
            let mut wl_pos = 0.0;
            let w_pos_total: f64 = col.iter().map(|c| c.2).sum();
            for s in 0..col.len() - 1 {
                wl += col[s].1;
                wl_pos += col[s].2;
                if col[s].0 == col[s + 1].0 {
                    continue;
                }
                let left_count = s + 1;
                let right_count = col.len() - left_count;
                if left_count < self.cfg.min_leaf || right_count < self.cfg.min_leaf {
                    continue;
                }
                let wr = w_total - wl;
                let decrease = node_gini
                    - (wl / w_total) * gini(wl_pos, wl)
                    - (wr / w_total) * gini(w_pos_total - wl_pos, wr);
                if decrease > 1e-12 && best.as_ref().map_or(true, |b| decrease > b.decrease) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: 0.5 * (col[s].0 + col[s + 1].0),
                        decrease,
                    });
                }
            }
        }
        best
    }
}

fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut next = 0usize;
    for i in 0..idx.len() {
        if pred(idx[i]) {
            idx.swap(next, i);
            next += 1;
        }
    }
    next
}

/// `m` distinct values from `0..p`, in random order.
fn sample_distinct(p: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..m {
        let j = rng.gen_range(i..p);
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool
}

/// Trains the forest. Trees are independent given per-tree child seeds,
/// so the result does not depend on the worker count.
pub fn train_forest(ds: &Dataset, cfg: &ForestConfig) -> Result<ForestModel, CoreError> {
    if cfg.n_trees == 0 {
        return Err(CoreError::InvalidParameter("n_trees=0".into()));
    }
    if cfg.min_leaf == 0 {
        return Err(CoreError::InvalidParameter("min_leaf=0".into()));
    }
    let pos = ds.positive_count();
    if pos == 0 || pos == ds.n_rows {
        return Err(CoreError::SingleClass);
    }
    let weights = sample_weights(&ds.y, cfg.class_weighting);
    let results: Vec<(Tree, Vec<f64>)> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, 0xF0 + t as u64));
            let mut idx: Vec<usize> = (0..ds.n_rows)
                .map(|_| rng.gen_range(0..ds.n_rows))
                .collect();
            let root_weight: f64 = idx.iter().map(|&i| weights[i]).sum();
            let mut builder = TreeBuilder {
                ds,
                weights: &weights,
                cfg,
                nodes: Vec::new(),
                importance: vec![0.0; ds.n_cols],
                root_weight: root_weight.max(f64::MIN_POSITIVE),
            };
            let root = builder.grow(&mut idx, 0, &mut rng);
            debug_assert_eq!(root, 0);
            (Tree { nodes: builder.nodes }, builder.importance)
        })
        .collect();

    let mut importances = vec![0.0; ds.n_cols];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for (tree, imp) in results {
        for (a, b) in importances.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    }
    Ok(ForestModel {
        trees,
        importances,
        n_features: ds.n_cols,
    })
}

impl ForestModel {
    pub fn predict_scores(&self, ds: &Dataset) -> Result<Vec<f64>, CoreError> {
        if ds.n_cols != self.n_features {
            return Err(CoreError::ColumnMismatch {
                expected: self.n_features,
                got: ds.n_cols,
            });
        }
        let n_trees = self.trees.len() as f64;
        Ok((0..ds.n_rows)
            .into_par_iter()
            .map(|r| {
                let row = ds.row(r);
                self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / n_trees
            })
            .collect())
    }

    /// Normalized Gini importances paired with feature names.
    pub fn named_importances(&self, names: &[String]) -> Vec<(String, f64)> {
        names
            .iter()
            .cloned()
            .zip(self.importances.iter().copied())
            .collect()
    }
}
