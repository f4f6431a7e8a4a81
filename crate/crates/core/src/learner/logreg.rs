//! L2-regularized logistic regression trained by full-batch gradient
//! descent with backtracking line search.

use serde::{Deserialize, Serialize};

use super::{sample_weights, ClassWeighting, Dataset};
use crate::error::CoreError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub class_weighting: ClassWeighting,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-3,
            class_weighting: ClassWeighting::Balanced,
            max_iter: 5000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub converged: bool,
    pub final_grad_norm: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weighted mean cross-entropy plus (l2/2)||w||^2 (bias unpenalized),
/// with its gradient over [weights..., bias]. Exposed so tests can check
/// the gradient against finite differences.
pub fn loss_and_grad(
    ds: &Dataset,
    sample_w: &[f64],
    l2: f64,
    weights: &[f64],
    bias: f64,
) -> (f64, Vec<f64>) {
    let n_cols = ds.n_cols;
    let w_sum: f64 = sample_w.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; n_cols + 1];
    for r in 0..ds.n_rows {
        let row = ds.row(r);
        let z = bias + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>();
        let p = sigmoid(z);
        let y = ds.y[r] as f64;
        let sw = sample_w[r];
        // Numerically safe cross-entropy via log1p of the logit.
        let ce = if z >= 0.0 {
            (1.0 - y) * z + (1.0 + (-z).exp()).ln()
        } else {
            -y * z + (1.0 + z.exp()).ln()
        };
        loss += sw * ce;
        let g = sw * (p - y);
        for (c, x) in row.iter().enumerate() {
            grad[c] += g * x;
        }
        grad[n_cols] += g;
    }
    loss /= w_sum;
    for g in grad.iter_mut() {
        *g /= w_sum;
    }
    for (c, w) in weights.iter().enumerate() {
        loss += 0.5 * l2 * w * w;
        grad[c] += l2 * w;
    }
    (loss, grad)
}

/// Trains on standardized, fully-imputed inputs. The line search only
/// accepts steps that decrease the loss, so the loss trajectory is
/// monotone. Non-convergence returns the model anyway with
/// `converged = false`.
pub fn train_logreg(ds: &Dataset, cfg: &LogRegConfig) -> Result<LinearModel, CoreError> {
    let pos = ds.positive_count();
    if pos == 0 || pos == ds.n_rows {
        return Err(CoreError::SingleClass);
    }
    let sample_w = sample_weights(&ds.y, cfg.class_weighting);
    let mut weights = vec![0.0; ds.n_cols];
    let mut bias = 0.0;
    let (mut loss, mut grad) = loss_and_grad(ds, &sample_w, cfg.l2, &weights, bias);
    let mut step = 1.0f64;
    let mut converged = false;
    let mut grad_norm = grad_l2(&grad);
    for _ in 0..cfg.max_iter {
        if grad_norm < cfg.tol {
            converged = true;
            break;
        }
        // Backtrack from a slightly grown step so progress can speed
        // back up after a cautious iteration.
        step = (step * 2.0).min(1e6);
        loop {
            let cand_w: Vec<f64> = weights
                .iter()
                .zip(&grad)
                .map(|(w, g)| w - step * g)
                .collect();
            let cand_b = bias - step * grad[ds.n_cols];
            let (cand_loss, cand_grad) = loss_and_grad(ds, &sample_w, cfg.l2, &cand_w, cand_b);
            if cand_loss < loss {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                grad = cand_grad;
                grad_norm = grad_l2(&grad);
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if step < 1e-18 {
            break;
        }
    }
    Ok(LinearModel {
        weights,
        bias,
        converged,
        final_grad_norm: grad_norm,
    })
}

fn grad_l2(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

impl LinearModel {
    pub fn predict_scores(&self, ds: &Dataset) -> Result<Vec<f64>, CoreError> {
        if ds.n_cols != self.weights.len() {
            return Err(CoreError::ColumnMismatch {
                expected: self.weights.len(),
                got: ds.n_cols,
            });
        }
        Ok((0..ds.n_rows)
            .map(|r| {
                let z = self.bias
                    + ds.row(r)
                        .iter()
                        .zip(&self.weights)
                        .map(|(x, w)| x * w)
                        .sum::<f64>();
                sigmoid(z)
            })
            .collect())
    }
}
