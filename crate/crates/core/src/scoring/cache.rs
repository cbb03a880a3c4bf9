use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use super::{MatchScorer, ScoreError, ScorePair};

type Key = (String, String, String);

/// Memoizes a match scorer by exact (comment, key point, topic) text.
///
/// Reads take a shared lock; inserts take the write lock. A miss that races
/// with another miss on the same key scores twice and stores the same value.
pub struct CachedScorer<S> {
    inner: S,
    cache: RwLock<HashMap<Key, f64>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl<S: MatchScorer> CachedScorer<S> {
    pub fn new(inner: S) -> Self {
        CachedScorer {
            inner,
            cache: RwLock::new(HashMap::new()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.cache.read().expect("score cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    fn lookup(&self, p: &ScorePair<'_>) -> Option<f64> {
        // HashMap<(String, String, String)> cannot be probed with borrowed
        // parts, so the key is built once per lookup.
        let key = (p.comment.to_string(), p.key_point.to_string(), p.topic.to_string());
        self.cache.read().expect("score cache poisoned").get(&key).copied()
    }
}

impl<S: MatchScorer> MatchScorer for CachedScorer<S> {
    fn score(&self, comment: &str, key_point: &str, topic: &str) -> Result<f64, ScoreError> {
        Ok(self.score_batch(&[ScorePair::new(comment, key_point, topic)])?[0])
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
        let mut out: Vec<Option<f64>> = pairs.iter().map(|p| self.lookup(p)).collect();
        let missing: Vec<usize> = (0..pairs.len()).filter(|&i| out[i].is_none()).collect();
        self.hits
            .fetch_add((pairs.len() - missing.len()) as u64, Ordering::Relaxed);
        if !missing.is_empty() {
            self.misses.fetch_add(missing.len() as u64, Ordering::Relaxed);
            let batch: Vec<ScorePair<'_>> = missing.iter().map(|&i| pairs[i]).collect();
            let scores = self.inner.score_batch(&batch).map_err(|e| match e {
                ScoreError::AtPair { index, source } => ScoreError::AtPair {
                    index: missing[index],
                    source,
                },
                other => other,
            })?;
            let mut cache = self.cache.write().expect("score cache poisoned");
            for (&i, s) in missing.iter().zip(scores) {
                let p = &pairs[i];
                cache.insert((p.comment.to_string(), p.key_point.to_string(), p.topic.to_string()), s);
                out[i] = Some(s);
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every slot filled")).collect())
    }
}
