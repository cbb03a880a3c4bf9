use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::ingest::{Comment, Dataset};

/// Draws `n` comments spread as evenly as possible over the topics.
///
/// Quotas differ by at most one between topics. Remainder slots go to topics
/// picked by a seeded shuffle, and topics too small for their quota give all
/// their comments with the deficit spread over the rest. Output follows
/// dataset order.
pub fn sample_uniform(dataset: &Dataset, n: usize, seed: u64) -> Result<Vec<Comment>, EvalError> {
    if n == 0 {
        return Err(EvalError::Empty("sample size"));
    }
    if dataset.comments.is_empty() {
        return Err(EvalError::Empty("dataset"));
    }
    if n > dataset.comments.len() {
        return Err(EvalError::InsufficientComments {
            requested: n,
            available: dataset.comments.len(),
        });
    }
    let by_topic: Vec<Vec<&Comment>> = dataset
        .topics
        .iter()
        .map(|t| dataset.comments.iter().filter(|c| &c.topic_id == t).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotas = vec![0usize; by_topic.len()];
    let mut remaining = n;
    while remaining > 0 {
        let mut open: Vec<usize> = (0..by_topic.len())
            .filter(|&i| quotas[i] < by_topic[i].len())
            .collect();
        open.shuffle(&mut rng);
        let share = remaining / open.len();
        let extra = remaining % open.len();
        for (pos, &i) in open.iter().enumerate() {
            let want = share + usize::from(pos < extra);
            let take = want.min(by_topic[i].len() - quotas[i]);
            quotas[i] += take;
            remaining -= take;
        }
    }

    let mut out = Vec::with_capacity(n);
    for (comments, quota) in by_topic.iter().zip(quotas) {
        let mut picked = index::sample(&mut rng, comments.len(), quota).into_vec();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|i| comments[i].clone()));
    }
    let order: std::collections::HashMap<&str, usize> = dataset
        .comments
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    out.sort_by_key(|c| order[c.id.as_str()]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Domain;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn dataset(sizes: &[usize]) -> Dataset {
        let mut comments = Vec::new();
        for (t, &size) in sizes.iter().enumerate() {
            for i in 0..size {
                comments.push(Comment::new(format!("t{t}-{i}"), format!("t{t}"), None, format!("comment {i}")));
            }
        }
        Dataset::new("d", Domain::Reviews, comments).unwrap()
    }

    fn counts(sample: &[Comment]) -> HashMap<String, usize> {
        let mut m = HashMap::new();
        for c in sample {
            *m.entry(c.topic_id.clone()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn one_per_topic() {
        let ds = dataset(&[2, 2, 2]);
        for seed in 0..10 {
            let s = sample_uniform(&ds, 3, seed).unwrap();
            assert!(counts(&s).values().all(|&c| c == 1));
        }
    }

    #[test]
    fn whole_dataset_and_determinism() {
        let ds = dataset(&[3, 5, 1]);
        assert_eq!(sample_uniform(&ds, 9, 4).unwrap(), ds.comments);
        assert_eq!(sample_uniform(&ds, 5, 11).unwrap(), sample_uniform(&ds, 5, 11).unwrap());
        assert!(matches!(
            sample_uniform(&ds, 10, 0),
            Err(EvalError::InsufficientComments { .. })
        ));
        assert!(sample_uniform(&ds, 0, 0).is_err());
    }

    #[test]
    fn deficit_is_redistributed() {
        let ds = dataset(&[1, 10, 10]);
        let s = sample_uniform(&ds, 9, 3).unwrap();
        let c = counts(&s);
        assert_eq!(c["t0"], 1);
        assert_eq!(c["t1"] + c["t2"], 8);
        assert!(c["t1"].abs_diff(c["t2"]) <= 1);
    }

    proptest! {
        #[test]
        fn quotas_differ_by_at_most_one(topics in 1usize..6, per in 5usize..12, seed in any::<u64>(), frac in 0.1f64..1.0) {
            let ds = dataset(&vec![per; topics]);
            let n = ((topics * per) as f64 * frac).ceil() as usize;
            let s = sample_uniform(&ds, n, seed).unwrap();
            prop_assert_eq!(s.len(), n);
            let c = counts(&s);
            let values: Vec<usize> = (0..topics).map(|t| *c.get(&format!("t{t}")).unwrap_or(&0)).collect();
            prop_assert!(values.iter().max().unwrap() - values.iter().min().unwrap() <= 1);
        }
    }
}
