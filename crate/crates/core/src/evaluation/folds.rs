use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClassLabel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub n_folds: usize,
    /// Fold index per sample.
    pub fold: Vec<usize>,
    /// Classes (by index) with fewer members than folds.
    pub undersized: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == f).collect()
    }

    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] != f).collect()
    }
}

/// Each class is shuffled with a seeded generator and dealt round-robin;
/// the deal continues where the previous class stopped so fold sizes stay
/// balanced overall as well as per class.
pub fn stratified_folds<L: ClassLabel>(labels: &[L], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidParameter("need at least two folds".into()));
    }
    if n_folds > labels.len() {
        return Err(Error::InvalidParameter(format!("{n_folds} folds for {} samples", labels.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut undersized = Vec::new();
    let mut next = 0;
    for (ci, &class) in L::ALL.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < n_folds {
            undersized.push(ci);
        }
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(FoldAssignment {
        n_folds,
        fold,
        undersized,
    })
}
