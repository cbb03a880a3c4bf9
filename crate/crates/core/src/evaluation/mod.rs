//! Evaluation of matching models and analysis output.

mod agreement;
mod coverage;
mod metrics;
mod sampling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Stance;
use crate::policies::{PolicyError, PolicyKind};
use crate::scoring::ScoreError;

pub use agreement::{
    annotator_kappa, cohen_kappa, fleiss_from_annotations, fleiss_kappa, majority_label, reliable_annotators,
    split_consistency, split_halves, AnnotationRecord, AnnotationSet, FleissMode, Judgment,
    ANNOTATOR_KAPPA_CUTOFF,
};
pub use coverage::{
    best_match_sample, default_levels, load_sample, precision_at_coverage, read_sample, CoverageCurve,
    SampleRecord,
};
pub use metrics::{
    confusion_metrics, evaluate_policy, predict, tune_threshold, Confusion, ConfusionMetrics,
};
pub use sampling::sample_uniform;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("pair {0} has no score")]
    MissingScore(usize),
    #[error("invalid coverage levels: {0}")]
    InvalidLevels(String),
    #[error("requested {requested} comments but only {available} are available")]
    InsufficientComments { requested: usize, available: usize },
    #[error("items have unequal rating counts")]
    RaggedRatings,
    #[error("fewer than two ratings per item")]
    TooFewRatings,
    #[error("annotator {annotator:?} judged ({comment_id:?}, {key_point_id:?}) twice")]
    DuplicateJudgment {
        comment_id: String,
        key_point_id: String,
        annotator: String,
    },
    #[error("item ({comment_id:?}, {key_point_id:?}) has {found} judgments, expected {expected}")]
    WrongRatingCount {
        comment_id: String,
        key_point_id: String,
        expected: usize,
        found: usize,
    },
    #[error("threshold tuning does not apply to policy {0}")]
    UnsupportedPolicy(PolicyKind),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// A (comment, key point) pair with its gold label and, once scored, the
/// match score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub comment_text: String,
    pub key_point_text: String,
    pub topic: String,
    pub stance: Option<Stance>,
    pub label: bool,
    pub score: Option<f64>,
}

impl LabeledPair {
    pub fn new(topic: &str, comment: &str, key_point: &str, label: bool) -> Self {
        LabeledPair {
            comment_text: comment.to_string(),
            key_point_text: key_point.to_string(),
            topic: topic.to_string(),
            stance: None,
            label,
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }
}
