use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Assignment of every trial to one of `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<usize>,
}

/// Seeded uniform shuffle of `0..n`, then round-robin assignment, so fold
/// sizes differ by at most one.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 || n < k {
        return Err(EvalError::Folds { n, k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignments = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, seed, assignments })
}

/// Folds over groups (e.g. participant pairs): every member of a group
/// lands in the same fold. Groups are shuffled and dealt round-robin, so
/// group counts per fold differ by at most one; trial counts may not.
pub fn make_group_folds(groups: &[String], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    let mut distinct: Vec<&str> = groups.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if k < 2 || distinct.len() < k {
        return Err(EvalError::Folds { n: distinct.len(), k });
    }
    distinct.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: BTreeMap<&str, usize> = distinct.iter().enumerate().map(|(pos, g)| (*g, pos % k)).collect();
    Ok(FoldPlan {
        k,
        seed,
        assignments: groups.iter().map(|g| fold_of[g.as_str()]).collect(),
    })
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }
}
