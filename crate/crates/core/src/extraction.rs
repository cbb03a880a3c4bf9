//! Key point candidate extraction.
//!
//! A comment yields a candidate when its analysis text is a single sentence
//! no longer than the token cap, does not open with a pronoun, and its
//! quality score reaches the configured minimum.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ingest::{first_sentence, token_count, tokens, Comment, Domain};
use crate::scoring::{score_quality, QualityItem, QualityScorer, ScoreError};

pub const DEFAULT_PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "this", "that", "these", "those", "there", "me", "him", "her",
    "us", "them", "my", "your", "his", "its", "our", "their",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    pub max_tokens: usize,
    pub min_quality: f64,
    pub pronoun_blocklist: BTreeSet<String>,
}

impl CandidateConfig {
    pub fn for_domain(domain: Domain) -> Self {
        let (max_tokens, min_quality) = match domain {
            Domain::Arguments => (12, 0.7),
            Domain::Survey => (10, 0.4),
            Domain::Reviews => (12, 0.35),
        };
        CandidateConfig {
            max_tokens,
            min_quality,
            pronoun_blocklist: default_pronouns(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens < 1 {
            return Err("candidate max_tokens must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.min_quality) {
            return Err(format!("candidate min_quality {} outside [0, 1]", self.min_quality));
        }
        Ok(())
    }
}

pub fn default_pronouns() -> BTreeSet<String> {
    DEFAULT_PRONOUNS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPointCandidate {
    pub id: String,
    pub source_comment_id: String,
    pub text: String,
    pub token_count: usize,
    pub quality: f64,
}

pub fn is_single_sentence(text: &str) -> bool {
    match first_sentence(text) {
        Ok(first) => first == text.trim(),
        Err(_) => false,
    }
}

/// Case-insensitive check of the first token against the blocklist.
pub fn starts_with_pronoun(text: &str, blocklist: &BTreeSet<String>) -> bool {
    tokens(text)
        .next()
        .map(|t| blocklist.contains(&t.to_lowercase()))
        .unwrap_or(false)
}

/// Extracts candidates ordered by quality descending, id ascending on ties.
/// Candidate ids are the source comment ids.
pub fn extract_candidates(
    comments: &[Comment],
    cfg: &CandidateConfig,
    quality: &dyn QualityScorer,
) -> Result<Vec<KeyPointCandidate>, ScoreError> {
    let gated: Vec<(&Comment, &str, usize)> = comments
        .iter()
        .filter_map(|c| {
            let text = c.analysis_text.trim();
            if !is_single_sentence(text) || starts_with_pronoun(text, &cfg.pronoun_blocklist) {
                return None;
            }
            let n = token_count(text);
            (n <= cfg.max_tokens).then_some((c, text, n))
        })
        .collect();
    let items: Vec<QualityItem<'_>> = gated
        .iter()
        .map(|(c, text, _)| QualityItem {
            text,
            topic: &c.topic_id,
        })
        .collect();
    let scores = score_quality(quality, &items)?;
    let mut candidates: Vec<KeyPointCandidate> = gated
        .into_iter()
        .zip(scores)
        .filter(|(_, q)| *q >= cfg.min_quality)
        .map(|((c, text, n), q)| KeyPointCandidate {
            id: c.id.clone(),
            source_comment_id: c.id.clone(),
            text: text.to_string(),
            token_count: n,
            quality: q,
        })
        .collect();
    candidates.sort_by(|a, b| b.quality.total_cmp(&a.quality).then_with(|| a.id.cmp(&b.id)));
    Ok(candidates)
}
