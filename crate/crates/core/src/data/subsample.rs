//! Stratified per-class subsampling with a minimum total size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::FeatureSet;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSpec {
    /// Examples drawn from each class (the N/K regime).
    pub samples_per_class: usize,
    #[serde(default = "default_min_total")]
    pub min_total: usize,
    #[serde(default = "default_num_splits")]
    pub num_splits: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_total() -> usize {
    20
}

fn default_num_splits() -> usize {
    5
}

impl SubsampleSpec {
    pub fn new(samples_per_class: usize, seed: u64) -> Self {
        Self {
            samples_per_class,
            min_total: default_min_total(),
            num_splits: default_num_splits(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0 || self.num_splits == 0 {
            return Err(Error::validation("samples_per_class and num_splits must be at least 1"));
        }
        Ok(())
    }
}

/// Sorted row indices of split `split_index`.
///
/// Each class contributes `samples_per_class` examples (or all of its
/// examples when it has fewer); if that totals less than `min_total`, the
/// rest is drawn uniformly from the remaining rows. Depends only on the
/// labels, the spec and `split_index`, so the same indices can be applied
/// to every checkpoint's features.
pub fn subsample_indices(labels: &[usize], num_classes: usize, spec: &SubsampleSpec, split_index: usize) -> Result<Vec<usize>> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::validation("cannot subsample an empty dataset"));
    }
    if split_index >= spec.num_splits {
        return Err(Error::validation(format!(
            "split index {split_index} out of range for {} splits",
            spec.num_splits
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[split_index as u64]));
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::validation(format!("label {y} at row {i} is not below K = {num_classes}")));
        }
        by_class[y].push(i);
    }
    let mut chosen = vec![false; labels.len()];
    let mut picked = Vec::new();
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter().take(spec.samples_per_class) {
            chosen[i] = true;
            picked.push(i);
        }
    }
    let target = spec.min_total.min(labels.len());
    if picked.len() < target {
        let mut rest: Vec<usize> = (0..labels.len()).filter(|&i| !chosen[i]).collect();
        rest.shuffle(&mut rng);
        picked.extend(rest.into_iter().take(target - picked.len()));
    }
    picked.sort_unstable();
    Ok(picked)
}

pub fn stratified_subsample(dataset: &FeatureSet, spec: &SubsampleSpec, split_index: usize) -> Result<(FeatureSet, Vec<usize>)> {
    let indices = subsample_indices(&dataset.labels, dataset.num_classes, spec, split_index)?;
    Ok((dataset.subset(&indices), indices))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(k: usize, per: usize) -> Vec<usize> {
        (0..k * per).map(|i| i % k).collect()
    }

    #[test]
    fn exact_quota_per_class() {
        let y = labels(10, 30);
        let idx = subsample_indices(&y, 10, &SubsampleSpec::new(2, 1), 0).unwrap();
        assert_eq!(idx.len(), 20);
        let mut counts = vec![0; 10];
        idx.iter().for_each(|&i| counts[y[i]] += 1);
        assert!(counts.iter().all(|&c| c == 2));
    }

    #[test]
    fn topped_up_to_min_total() {
        let y = labels(2, 100);
        let idx = subsample_indices(&y, 2, &SubsampleSpec::new(5, 1), 3).unwrap();
        assert_eq!(idx.len(), 20);
        let mut dedup = idx.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 20);
    }

    #[test]
    fn small_classes_contribute_everything() {
        let mut y = labels(3, 10);
        y.push(3);
        let spec = SubsampleSpec { min_total: 1, ..SubsampleSpec::new(4, 0) };
        let idx = subsample_indices(&y, 4, &spec, 0).unwrap();
        assert_eq!(idx.len(), 13);
        assert!(idx.contains(&30));
    }

    #[test]
    fn errors() {
        assert!(subsample_indices(&[], 2, &SubsampleSpec::new(2, 0), 0).is_err());
        assert!(subsample_indices(&[0, 1], 2, &SubsampleSpec::new(2, 0), 5).is_err());
    }

    proptest! {
        #[test]
        fn deterministic_and_disjoint(seed in any::<u64>(), split in 0usize..5, per in 1usize..8) {
            let y = labels(4, 9);
            let spec = SubsampleSpec::new(per, seed);
            let a = subsample_indices(&y, 4, &spec, split).unwrap();
            let b = subsample_indices(&y, 4, &spec, split).unwrap();
            prop_assert_eq!(&a, &b);
            let mut d = a.clone();
            d.dedup();
            prop_assert_eq!(d.len(), a.len());
            prop_assert_eq!(a.len(), (4 * per.min(9)).max(20));
        }
    }
}
