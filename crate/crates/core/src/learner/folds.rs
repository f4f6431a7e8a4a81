//! Stratified k-fold splitting, deterministic given a seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::child_seed;
use crate::error::CoreError;

/// Splits indices into k folds preserving class proportions within one
/// sample. Returns (train, test) index pairs; test sets partition the
/// full index set.
pub fn stratified_kfold(
    y: &[u8],
    k: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, CoreError> {
    if k < 2 {
        return Err(CoreError::InvalidParameter(format!("k={k} folds")));
    }
    let mut fold_of = vec![0usize; y.len()];
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < k {
            return Err(CoreError::ClassSmallerThanK {
                class: class as u32,
                count: idx.len(),
                k,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 0x0F01 + class as u64));
        idx.shuffle(&mut rng);
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let test: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
        folds.push((train, test));
    }
    Ok(folds)
}
