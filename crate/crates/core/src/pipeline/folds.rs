use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Topic assignment for cross-validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub folds: Vec<Fold>,
}

impl FoldSpec {
    /// Shuffles the distinct topics with `seed` and cuts them into `n_folds`
    /// consecutive test blocks (sizes differ by at most one). Each fold's dev
    /// set is the `dev_size` topics following its test block, wrapping
    /// around; the remaining topics train.
    ///
    /// With 28 topics, 4 folds and `dev_size` 4 this gives 17/4/7 splits.
    pub fn build(topics: &[String], n_folds: usize, dev_size: usize, seed: u64) -> Result<Self> {
        let mut shuffled: Vec<String> = topics.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let n = shuffled.len();
        if n_folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {n_folds}")));
        }
        if dev_size < 1 {
            return Err(Error::Config("dev_size must be at least 1".into()));
        }
        let largest_block = n.div_ceil(n_folds);
        if n < n_folds || largest_block + dev_size > n {
            return Err(Error::Config(format!(
                "{n} topics cannot be split into {n_folds} folds with {dev_size} dev topics"
            )));
        }
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let mut folds = Vec::with_capacity(n_folds);
        let mut start = 0;
        for i in 0..n_folds {
            let size = n / n_folds + usize::from(i < n % n_folds);
            let test: Vec<String> = shuffled[start..start + size].to_vec();
            let dev: Vec<String> = (0..dev_size).map(|k| shuffled[(start + size + k) % n].clone()).collect();
            let train: Vec<String> = shuffled
                .iter()
                .filter(|t| !test.contains(t) && !dev.contains(t))
                .cloned()
                .collect();
            folds.push(Fold { train, dev, test });
            start += size;
        }
        Ok(FoldSpec { folds })
    }

    /// Checks that each fold's sets are disjoint, that every topic is tested
    /// exactly once, and that every given topic is known to every fold.
    pub fn validate<'a>(&self, topics: impl IntoIterator<Item = &'a str>) -> Result<()> {
        if self.folds.is_empty() {
            return Err(Error::Config("fold spec has no folds".into()));
        }
        let mut tested: BTreeMap<&str, usize> = BTreeMap::new();
        for (i, fold) in self.folds.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for t in fold.train.iter().chain(&fold.dev).chain(&fold.test) {
                if !seen.insert(t.as_str()) {
                    return Err(Error::Config(format!("fold {i}: topic {t:?} appears twice")));
                }
            }
            if fold.dev.is_empty() || fold.test.is_empty() {
                return Err(Error::Config(format!("fold {i}: empty dev or test set")));
            }
            for t in &fold.test {
                *tested.entry(t.as_str()).or_default() += 1;
            }
        }
        if let Some((t, k)) = tested.iter().find(|(_, k)| **k != 1) {
            return Err(Error::Config(format!("topic {t:?} is tested {k} times")));
        }
        for t in topics {
            if !tested.contains_key(t) {
                return Err(Error::Config(format!("topic {t:?} is not covered by the fold spec")));
            }
            if let Some(i) = self
                .folds
                .iter()
                .position(|f| !f.train.iter().chain(&f.dev).chain(&f.test).any(|x| x == t))
            {
                return Err(Error::Config(format!("topic {t:?} is missing from fold {i}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn topics(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("topic-{i:02}")).collect()
    }

    #[test]
    fn four_folds_over_28_topics() {
        let all = topics(28);
        let spec = FoldSpec::build(&all, 4, 4, 7).unwrap();
        assert_eq!(spec.folds.len(), 4);
        for f in &spec.folds {
            assert_eq!((f.train.len(), f.dev.len(), f.test.len()), (17, 4, 7));
        }
        spec.validate(all.iter().map(String::as_str)).unwrap();
        assert_eq!(spec, FoldSpec::build(&all, 4, 4, 7).unwrap());
        assert_ne!(spec, FoldSpec::build(&all, 4, 4, 8).unwrap());
    }

    #[test]
    fn rejects_impossible_splits() {
        assert!(FoldSpec::build(&topics(3), 4, 1, 0).is_err());
        assert!(FoldSpec::build(&topics(8), 4, 7, 0).is_err());
        assert!(FoldSpec::build(&topics(8), 1, 1, 0).is_err());
        let spec = FoldSpec::build(&topics(8), 4, 2, 0).unwrap();
        assert!(spec.validate(["unknown"]).is_err());
        let mut broken = spec.clone();
        let dup = broken.folds[0].test[0].clone();
        broken.folds[0].dev.push(dup);
        assert!(broken.validate(std::iter::empty()).is_err());
    }

    proptest! {
        #[test]
        fn every_topic_tested_once(n in 4usize..40, k in 2usize..6, dev in 1usize..4, seed in any::<u64>()) {
            prop_assume!(n >= k && n.div_ceil(k) + dev <= n);
            let all = topics(n);
            let spec = FoldSpec::build(&all, k, dev, seed).unwrap();
            prop_assert!(spec.validate(all.iter().map(String::as_str)).is_ok());
            for f in &spec.folds {
                prop_assert_eq!(f.train.len() + f.dev.len() + f.test.len(), n);
            }
        }
    }
}
