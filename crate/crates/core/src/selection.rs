//! Key point selection.
//!
//! Candidates are ranked by how many items they attract under the
//! best-match-plus-threshold rule. The ranked list is then traversed and a
//! candidate is dropped when its symmetric score with any higher ranked
//! candidate (dropped ones included) exceeds the threshold. Dropped
//! candidates and the items they had attracted are matched again against the
//! survivors, and the survivors are re-ranked by their final match counts.
//! Every ranking tie is broken by candidate id.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::KeyPointCandidate;
use crate::ingest::Comment;
use crate::policies::{apply_policy, best_match, Policy, PolicyError};
use crate::scoring::{score_pairs, symmetric_score, MatchScorer, ScoreError, ScorePair};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("no key point candidates")]
    EmptyCandidates,
    #[error("no key points")]
    NoKeyPoints,
    #[error("duplicate key point id {0:?}")]
    DuplicateKeyPoint(String),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Comment,
    Candidate,
}

/// Something that can be matched to a key point: a comment, or a candidate
/// absorbed by a higher ranked one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub text: String,
    pub kind: ItemKind,
}

impl Item {
    pub fn comment(id: impl Into<String>, text: impl Into<String>) -> Self {
        Item {
            id: id.into(),
            text: text.into(),
            kind: ItemKind::Comment,
        }
    }

    pub fn candidate(id: impl Into<String>, text: impl Into<String>) -> Self {
        Item {
            id: id.into(),
            text: text.into(),
            kind: ItemKind::Candidate,
        }
    }
}

impl From<&Comment> for Item {
    fn from(c: &Comment) -> Self {
        Item::comment(c.id.clone(), c.analysis_text.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedItem {
    pub id: String,
    pub kind: ItemKind,
    pub text: String,
    pub score: f64,
}

impl MatchedItem {
    fn new(item: &Item, score: f64) -> Self {
        MatchedItem {
            id: item.id.clone(),
            kind: item.kind,
            text: item.text.clone(),
            score,
        }
    }

    fn as_item(&self) -> Item {
        Item {
            id: self.id.clone(),
            text: self.text.clone(),
            kind: self.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_comment_id: Option<String>,
}

impl KeyPoint {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        KeyPoint {
            id: id.into(),
            text: text.into(),
            source_comment_id: None,
        }
    }
}

impl From<&KeyPointCandidate> for KeyPoint {
    fn from(c: &KeyPointCandidate) -> Self {
        KeyPoint {
            id: c.id.clone(),
            text: c.text.clone(),
            source_comment_id: Some(c.source_comment_id.clone()),
        }
    }
}

/// Key point id to the items matched to it, in item input order.
/// Key points without matches have no entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchMap {
    entries: BTreeMap<String, Vec<MatchedItem>>,
}

impl MatchMap {
    pub fn get(&self, key_point_id: &str) -> Option<&[MatchedItem]> {
        self.entries.get(key_point_id).map(Vec::as_slice)
    }

    pub fn count(&self, key_point_id: &str) -> usize {
        self.entries.get(key_point_id).map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[MatchedItem])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn into_inner(self) -> BTreeMap<String, Vec<MatchedItem>> {
        self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPointResult {
    pub key_point: KeyPoint,
    /// Sorted by score descending.
    pub matched: Vec<MatchedItem>,
    /// Number of items the key point held when selection finished, absorbed
    /// candidates included.
    pub selection_count: usize,
    /// Matched comments over all comments of the analysis unit.
    pub prevalence: f64,
}

impl KeyPointResult {
    pub fn comment_count(&self) -> usize {
        self.matched.iter().filter(|m| m.kind == ItemKind::Comment).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    /// Threshold for the initial matching and for redundancy removal.
    pub threshold: f64,
    /// Threshold used when re-matching removed candidates and their items.
    pub rematch_threshold: f64,
    /// When false, removed candidates and their items are dropped.
    pub rematch: bool,
}

impl SelectionParams {
    pub fn new(threshold: f64) -> Self {
        SelectionParams {
            threshold,
            rematch_threshold: threshold,
            rematch: true,
        }
    }
}

fn check_threshold(t: f64) -> Result<f64, SelectionError> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(SelectionError::Threshold(t))
    }
}

fn check_unique(key_points: &[KeyPoint]) -> Result<(), SelectionError> {
    let mut seen = HashSet::new();
    for kp in key_points {
        if !seen.insert(kp.id.as_str()) {
            return Err(SelectionError::DuplicateKeyPoint(kp.id.clone()));
        }
    }
    Ok(())
}

fn score_matrix(
    items: &[Item],
    key_points: &[KeyPoint],
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<Vec<f64>, ScoreError> {
    let pairs: Vec<ScorePair<'_>> = items
        .iter()
        .flat_map(|it| key_points.iter().map(move |kp| ScorePair::new(&it.text, &kp.text, topic)))
        .collect();
    score_pairs(scorer, &pairs)
}

fn sort_matched(items: &mut [MatchedItem]) {
    items.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.kind.cmp(&b.kind))
            .then_with(|| a.id.cmp(&b.id))
    });
}

/// Assigns each item to its best scoring key point when that score exceeds
/// `t`.
pub fn get_matches(
    items: &[Item],
    key_points: &[KeyPoint],
    t: f64,
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<MatchMap, SelectionError> {
    if key_points.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    check_threshold(t)?;
    check_unique(key_points)?;
    let scores = score_matrix(items, key_points, topic, scorer)?;
    let mut entries: BTreeMap<String, Vec<MatchedItem>> = BTreeMap::new();
    for (item, row) in items.iter().zip(scores.chunks(key_points.len())) {
        let (best, score) = best_match(key_points.iter().zip(row).map(|(kp, &s)| (kp.id.as_str(), s)))
            .expect("key points are non-empty");
        if score > t {
            entries
                .entry(best.to_string())
                .or_default()
                .push(MatchedItem::new(item, score));
        }
    }
    Ok(MatchMap { entries })
}

pub fn select_key_points(
    items: &[Item],
    candidates: &[KeyPoint],
    t: f64,
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<Vec<KeyPointResult>, SelectionError> {
    select_key_points_with(items, candidates, SelectionParams::new(t), topic, scorer)
}

pub fn select_key_points_with(
    items: &[Item],
    candidates: &[KeyPoint],
    params: SelectionParams,
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<Vec<KeyPointResult>, SelectionError> {
    let t = check_threshold(params.threshold)?;
    check_threshold(params.rematch_threshold)?;
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let mut matches = get_matches(items, candidates, t, topic, scorer)?.into_inner();

    let mut ranked: Vec<&KeyPoint> = candidates.iter().filter(|k| matches.contains_key(&k.id)).collect();
    ranked.sort_by(|a, b| {
        matches[&b.id]
            .len()
            .cmp(&matches[&a.id].len())
            .then_with(|| a.id.cmp(&b.id))
    });

    let mut pool: Vec<Item> = Vec::new();
    let mut removed = HashSet::new();
    for (i, k1) in ranked.iter().enumerate() {
        for k2 in &ranked[..i] {
            if symmetric_score(scorer, &k1.text, &k2.text, topic)? > t {
                pool.push(Item::candidate(k1.id.clone(), k1.text.clone()));
                let absorbed = matches.remove(&k1.id).unwrap_or_default();
                pool.extend(absorbed.iter().map(MatchedItem::as_item));
                removed.insert(k1.id.as_str());
                break;
            }
        }
    }

    let survivors: Vec<KeyPoint> = ranked
        .iter()
        .filter(|k| !removed.contains(k.id.as_str()))
        .map(|k| (*k).clone())
        .collect();
    if params.rematch && !pool.is_empty() && !survivors.is_empty() {
        let rematched = get_matches(&pool, &survivors, params.rematch_threshold, topic, scorer)?;
        for (kp, extra) in rematched.into_inner() {
            matches.entry(kp).or_default().extend(extra);
        }
    }

    let total_comments = items.iter().filter(|i| i.kind == ItemKind::Comment).count();
    let mut results: Vec<KeyPointResult> = survivors
        .into_iter()
        .map(|kp| {
            let mut matched = matches.remove(&kp.id).unwrap_or_default();
            sort_matched(&mut matched);
            let comments = matched.iter().filter(|m| m.kind == ItemKind::Comment).count();
            KeyPointResult {
                key_point: kp,
                selection_count: matched.len(),
                matched,
                prevalence: ratio(comments, total_comments),
            }
        })
        .collect();
    results.sort_by(|a, b| {
        b.matched
            .len()
            .cmp(&a.matched.len())
            .then_with(|| a.key_point.id.cmp(&b.key_point.id))
    });
    Ok(results)
}

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

pub fn truncate_key_points(mut results: Vec<KeyPointResult>, max_kps: usize) -> Vec<KeyPointResult> {
    results.truncate(max_kps);
    results
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpMatch {
    pub key_point_id: String,
    pub score: f64,
}

/// The key points a comment was assigned to under the final policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub comment_id: String,
    pub matches: Vec<KpMatch>,
}

/// Applies `policy` to every comment over the final key point list.
pub fn final_match(
    comments: &[Item],
    key_points: &[KeyPoint],
    policy: &Policy,
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<Vec<Assignment>, SelectionError> {
    if key_points.is_empty() {
        return Err(SelectionError::NoKeyPoints);
    }
    check_unique(key_points)?;
    let scores = score_matrix(comments, key_points, topic, scorer)?;
    comments
        .iter()
        .zip(scores.chunks(key_points.len()))
        .map(|(c, row)| {
            let by_id: BTreeMap<&str, f64> = key_points.iter().zip(row).map(|(kp, &s)| (kp.id.as_str(), s)).collect();
            let chosen = apply_policy(&by_id, policy)?;
            let mut matches: Vec<KpMatch> = chosen
                .into_iter()
                .map(|id| KpMatch {
                    key_point_id: id.to_string(),
                    score: by_id[id],
                })
                .collect();
            matches.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key_point_id.cmp(&b.key_point_id)));
            Ok(Assignment {
                comment_id: c.id.clone(),
                matches,
            })
        })
        .collect()
}

/// Final key point lists after assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalOutcome {
    pub key_points: Vec<KeyPointResult>,
    pub unmatched: Vec<String>,
}

/// Rebuilds matched lists and prevalence from final assignments and re-ranks
/// key points by matched comment count, keeping the incoming order on ties.
pub fn apply_assignments(results: Vec<KeyPointResult>, comments: &[Item], assignments: &[Assignment]) -> FinalOutcome {
    let mut by_kp: BTreeMap<&str, Vec<MatchedItem>> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for (item, a) in comments.iter().zip(assignments) {
        if a.matches.is_empty() {
            unmatched.push(item.id.clone());
        }
        for m in &a.matches {
            by_kp
                .entry(m.key_point_id.as_str())
                .or_default()
                .push(MatchedItem::new(item, m.score));
        }
    }
    let mut key_points: Vec<KeyPointResult> = results
        .into_iter()
        .map(|mut r| {
            let mut matched = by_kp.remove(r.key_point.id.as_str()).unwrap_or_default();
            sort_matched(&mut matched);
            r.prevalence = ratio(matched.len(), comments.len());
            r.matched = matched;
            r
        })
        .collect();
    key_points.sort_by_key(|k| std::cmp::Reverse(k.matched.len()));
    FinalOutcome { key_points, unmatched }
}

/// [`final_match`] followed by [`apply_assignments`].
pub fn assign_final(
    results: Vec<KeyPointResult>,
    comments: &[Item],
    policy: &Policy,
    topic: &str,
    scorer: &dyn MatchScorer,
) -> Result<FinalOutcome, SelectionError> {
    let key_points: Vec<KeyPoint> = results.iter().map(|r| r.key_point.clone()).collect();
    let assignments = final_match(comments, &key_points, policy, topic, scorer)?;
    Ok(apply_assignments(results, comments, &assignments))
}
