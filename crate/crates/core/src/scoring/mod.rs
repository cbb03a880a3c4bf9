//! Match and quality scoring.
//!
//! A [`MatchScorer`] estimates how well a key point captures the gist of a
//! comment; a [`QualityScorer`] rates a sentence as a key point candidate.
//! Both produce values in `[0, 1]`. Implementations here are a lookup table
//! (test oracles and precomputed scores), a lexical Jaccard fallback, a
//! caching wrapper and an HTTP client for the model sidecar.

mod cache;
mod lexical;
mod remote;
mod table;

use std::sync::Arc;

use thiserror::Error;

use crate::error::ErrorClass;

pub use cache::CachedScorer;
pub use lexical::{lexical_score, LexicalScorer};
pub use remote::{
    MatchScoresRequest, QualityRequest, RemoteConfig, RemoteScorer, ScoresResponse, WireItem, WirePair,
};
pub use table::{ScoreRecord, ScoreTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ScoreError {
    #[error("no score for ({comment:?}, {key_point:?}) in topic {topic:?}")]
    MissingPair {
        comment: String,
        key_point: String,
        topic: String,
    },
    #[error("no quality for {text:?} in topic {topic:?}")]
    MissingQuality { text: String, topic: String },
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("pair {index}: {source}")]
    AtPair {
        index: usize,
        #[source]
        source: Box<ScoreError>,
    },
}

impl ScoreError {
    pub fn at(self, index: usize) -> Self {
        match self {
            e @ ScoreError::AtPair { .. } => e,
            e => ScoreError::AtPair {
                index,
                source: Box::new(e),
            },
        }
    }

    /// The underlying error with any pair index stripped.
    pub fn root(&self) -> &ScoreError {
        match self {
            ScoreError::AtPair { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn class(&self) -> ErrorClass {
        ErrorClass::Scorer
    }
}

/// One (comment, key point, topic) triple to score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScorePair<'a> {
    pub comment: &'a str,
    pub key_point: &'a str,
    pub topic: &'a str,
}

impl<'a> ScorePair<'a> {
    pub fn new(comment: &'a str, key_point: &'a str, topic: &'a str) -> Self {
        ScorePair {
            comment,
            key_point,
            topic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QualityItem<'a> {
    pub text: &'a str,
    pub topic: &'a str,
}

pub trait MatchScorer: Send + Sync {
    /// Scores `key_point` as a summary of `comment`.
    fn score(&self, comment: &str, key_point: &str, topic: &str) -> Result<f64, ScoreError>;

    /// Scores a batch; positions in the output align with `pairs`.
    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                self.score(p.comment, p.key_point, p.topic)
                    .map_err(|e| e.at(i))
            })
            .collect()
    }
}

pub trait QualityScorer: Send + Sync {
    fn quality(&self, text: &str, topic: &str) -> Result<f64, ScoreError>;

    fn quality_batch(&self, items: &[QualityItem<'_>]) -> Result<Vec<f64>, ScoreError> {
        items
            .iter()
            .enumerate()
            .map(|(i, it)| self.quality(it.text, it.topic).map_err(|e| e.at(i)))
            .collect()
    }
}

macro_rules! forward_scorers {
    ($($ptr:ty),*) => {$(
        impl<T: MatchScorer + ?Sized> MatchScorer for $ptr {
            fn score(&self, comment: &str, key_point: &str, topic: &str) -> Result<f64, ScoreError> {
                (**self).score(comment, key_point, topic)
            }
            fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
                (**self).score_batch(pairs)
            }
        }
        impl<T: QualityScorer + ?Sized> QualityScorer for $ptr {
            fn quality(&self, text: &str, topic: &str) -> Result<f64, ScoreError> {
                (**self).quality(text, topic)
            }
            fn quality_batch(&self, items: &[QualityItem<'_>]) -> Result<Vec<f64>, ScoreError> {
                (**self).quality_batch(items)
            }
        }
    )*};
}

forward_scorers!(&T, Box<T>, Arc<T>);

pub(crate) fn check_range(score: f64) -> Result<f64, ScoreError> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(ScoreError::OutOfRange(score))
    }
}

/// Batch match scoring with range validation.
pub fn score_pairs(scorer: &dyn MatchScorer, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score_batch(pairs)?;
    if scores.len() != pairs.len() {
        return Err(ScoreError::Protocol(format!(
            "expected {} scores, got {}",
            pairs.len(),
            scores.len()
        )));
    }
    for (i, s) in scores.iter().enumerate() {
        check_range(*s).map_err(|e| e.at(i))?;
    }
    Ok(scores)
}

/// Batch quality scoring with range validation.
pub fn score_quality(scorer: &dyn QualityScorer, items: &[QualityItem<'_>]) -> Result<Vec<f64>, ScoreError> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.quality_batch(items)?;
    if scores.len() != items.len() {
        return Err(ScoreError::Protocol(format!(
            "expected {} scores, got {}",
            items.len(),
            scores.len()
        )));
    }
    for (i, s) in scores.iter().enumerate() {
        check_range(*s).map_err(|e| e.at(i))?;
    }
    Ok(scores)
}

/// Average of the two directional match scores.
pub fn symmetric_score(scorer: &dyn MatchScorer, a: &str, b: &str, topic: &str) -> Result<f64, ScoreError> {
    let forward = check_range(scorer.score(a, b, topic)?)?;
    let backward = check_range(scorer.score(b, a, topic)?)?;
    Ok((forward + backward) / 2.0)
}

/// Returns the same score for every input. Useful for degenerate baselines.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl MatchScorer for ConstantScorer {
    fn score(&self, _: &str, _: &str, _: &str) -> Result<f64, ScoreError> {
        check_range(self.0)
    }
}

impl QualityScorer for ConstantScorer {
    fn quality(&self, _: &str, _: &str) -> Result<f64, ScoreError> {
        check_range(self.0)
    }
}
