use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const N_FOLDS: usize = 5;

/// Assignment of units (trials, or segments in the leaky mode) to clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    /// `assignment[u]` is the cluster of unit `u`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Units of every cluster, ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut c = vec![Vec::new(); self.n_folds];
        for (u, &k) in self.assignment.iter().enumerate() {
            c[k].push(u);
        }
        c
    }

    pub fn cluster_of(&self, unit: usize) -> usize {
        self.assignment[unit]
    }
}

fn deal(order: impl IntoIterator<Item = usize>, n_units: usize, n_folds: usize, seed: u64) -> FoldPlan {
    let mut assignment = vec![0; n_units];
    for (pos, u) in order.into_iter().enumerate() {
        assignment[u] = pos % n_folds;
    }
    FoldPlan {
        n_folds,
        seed,
        assignment,
    }
}

fn check(n_units: usize, n_folds: usize) -> Result<()> {
    if n_folds < 2 {
        return Err(invalid("need at least 2 folds"));
    }
    if n_units < n_folds {
        return Err(invalid(format!("{n_units} trials cannot fill {n_folds} folds")));
    }
    Ok(())
}

/// Seeded shuffle of `0..n_units`, dealt round-robin into `n_folds`
/// clusters, so cluster sizes differ by at most one.
pub fn make_folds(n_units: usize, n_folds: usize, seed: u64) -> Result<FoldPlan> {
    check(n_units, n_folds)?;
    let mut order: Vec<usize> = (0..n_units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(deal(order, n_units, n_folds, seed))
}

/// Like [`make_folds`], but each class is shuffled and dealt in turn with one
/// running counter, so every cluster's class counts also differ by at most
/// one across clusters.
pub fn make_stratified_folds(labels: &[u8], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    check(labels.len(), n_folds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [0u8, 1] {
        let mut units: Vec<usize> = (0..labels.len()).filter(|&u| labels[u] == class).collect();
        units.shuffle(&mut rng);
        order.extend(units);
    }
    if order.len() != labels.len() {
        return Err(invalid("labels must be 0 or 1"));
    }
    Ok(deal(order, labels.len(), n_folds, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_trials_make_clusters_of_eight() {
        let p = make_folds(40, 5, 3).unwrap();
        assert!(p.clusters().iter().all(|c| c.len() == 8));
        assert_eq!(p, make_folds(40, 5, 3).unwrap());
        assert_ne!(p, make_folds(40, 5, 4).unwrap());
    }

    #[test]
    fn uneven_counts_are_balanced_within_one() {
        let p = make_folds(23, 5, 1).unwrap();
        let sizes: Vec<usize> = p.clusters().iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(make_folds(4, 5, 1).is_err());
    }

    #[test]
    fn stratified_balances_classes() {
        let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
        let p = make_stratified_folds(&labels, 5, 9).unwrap();
        for c in p.clusters() {
            assert_eq!(c.len(), 8);
            assert_eq!(c.iter().filter(|&&u| labels[u] == 1).count(), 4);
        }
        let skewed: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let p = make_stratified_folds(&skewed, 5, 2).unwrap();
        let ones: Vec<usize> = p.clusters().iter().map(|c| c.iter().filter(|&&u| skewed[u] == 1).count()).collect();
        assert!(ones.iter().max().unwrap() - ones.iter().min().unwrap() <= 1);
        let sizes: Vec<usize> = p.clusters().iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
