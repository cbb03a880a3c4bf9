//! Inter-annotator agreement.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// Annotators whose mean pairwise kappa falls below this are dropped.
pub const ANNOTATOR_KAPPA_CUTOFF: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judgment {
    Match,
    NoMatch,
    Unclear,
}

impl Judgment {
    pub fn is_match(self) -> bool {
        self == Judgment::Match
    }
}

/// True when strictly more than half of the judgments are `Match`. Unclear
/// counts against.
pub fn majority_label(judgments: &[Judgment]) -> bool {
    let matches = judgments.iter().filter(|j| j.is_match()).count();
    2 * matches > judgments.len()
}

/// Cohen's kappa of two binary rating vectors. Returns 1 when chance
/// agreement is already perfect.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::Empty("ratings"));
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let a_true = a.iter().filter(|x| **x).count() as u128;
    let b_true = b.iter().filter(|x| **x).count() as u128;
    let chance = a_true * b_true + (n - a_true) * (n - b_true);
    if chance == n * n {
        return Ok(1.0);
    }
    Ok(((n * agree) as f64 - chance as f64) / ((n * n - chance) as f64))
}

/// Fleiss' kappa. Each row holds one item's rating counts per category; all
/// rows must sum to the same number of raters, at least two.
pub fn fleiss_kappa(counts: &[Vec<usize>]) -> Result<f64, EvalError> {
    let first = counts.first().ok_or(EvalError::Empty("ratings"))?;
    let raters: usize = first.iter().sum();
    if counts
        .iter()
        .any(|row| row.len() != first.len() || row.iter().sum::<usize>() != raters)
    {
        return Err(EvalError::RaggedRatings);
    }
    if raters < 2 {
        return Err(EvalError::TooFewRatings);
    }
    let items = counts.len() as f64;
    let r = raters as f64;
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: usize = row.iter().map(|c| c * c).sum();
            (sq - raters) as f64 / (r * (r - 1.0))
        })
        .sum::<f64>()
        / items;
    let p_e: f64 = (0..first.len())
        .map(|j| {
            let p = counts.iter().map(|row| row[j]).sum::<usize>() as f64 / (items * r);
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-12 {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub comment_id: String,
    pub key_point_id: String,
    pub annotator_id: String,
    pub judgment: Judgment,
}

type ItemKey = (String, String);

/// Judgments keyed by (comment, key point) and then annotator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    items: BTreeMap<ItemKey, BTreeMap<String, Judgment>>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: AnnotationRecord) -> Result<(), EvalError> {
        let slot = self
            .items
            .entry((record.comment_id.clone(), record.key_point_id.clone()))
            .or_default();
        if slot.contains_key(&record.annotator_id) {
            return Err(EvalError::DuplicateJudgment {
                comment_id: record.comment_id,
                key_point_id: record.key_point_id,
                annotator: record.annotator_id,
            });
        }
        slot.insert(record.annotator_id, record.judgment);
        Ok(())
    }

    pub fn from_records(records: impl IntoIterator<Item = AnnotationRecord>) -> Result<Self, EvalError> {
        let mut set = Self::new();
        for r in records {
            set.insert(r)?;
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, EvalError> {
        let mut set = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: AnnotationRecord = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            set.insert(record)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = (&ItemKey, &BTreeMap<String, Judgment>)> {
        self.items.iter()
    }

    pub fn annotators(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .items
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Drops every judgment by an annotator not accepted by `keep`.
    pub fn retain_annotators(&mut self, mut keep: impl FnMut(&str) -> bool) {
        for judgments in self.items.values_mut() {
            judgments.retain(|a, _| keep(a));
        }
        self.items.retain(|_, j| !j.is_empty());
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FleissMode {
    /// Unclear is folded into no-match.
    #[default]
    Collapsed,
    ThreeWay,
}

pub fn fleiss_from_annotations(set: &AnnotationSet, mode: FleissMode) -> Result<f64, EvalError> {
    let rows: Vec<Vec<usize>> = set
        .items
        .values()
        .map(|judgments| {
            let mut row = match mode {
                FleissMode::Collapsed => vec![0; 2],
                FleissMode::ThreeWay => vec![0; 3],
            };
            for j in judgments.values() {
                let idx = match (mode, j) {
                    (_, Judgment::Match) => 0,
                    (FleissMode::Collapsed, _) => 1,
                    (FleissMode::ThreeWay, Judgment::NoMatch) => 1,
                    (FleissMode::ThreeWay, Judgment::Unclear) => 2,
                };
                row[idx] += 1;
            }
            row
        })
        .collect();
    fleiss_kappa(&rows)
}

/// Mean pairwise Cohen's kappa per annotator. Only peers sharing at least
/// `min_shared` items count, and annotators with fewer than `min_peers` such
/// peers are left out.
pub fn annotator_kappa(set: &AnnotationSet, min_shared: usize, min_peers: usize) -> BTreeMap<String, f64> {
    let annotators = set.annotators();
    let mut pairwise: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (i, a) in annotators.iter().enumerate() {
        for b in &annotators[i + 1..] {
            let (mut ra, mut rb) = (Vec::new(), Vec::new());
            for judgments in set.items.values() {
                if let (Some(ja), Some(jb)) = (judgments.get(*a), judgments.get(*b)) {
                    ra.push(ja.is_match());
                    rb.push(jb.is_match());
                }
            }
            if ra.is_empty() || ra.len() < min_shared {
                continue;
            }
            let k = cohen_kappa(&ra, &rb).expect("equal non-empty vectors");
            pairwise.entry(a).or_default().push(k);
            pairwise.entry(b).or_default().push(k);
        }
    }
    pairwise
        .into_iter()
        .filter(|(_, ks)| ks.len() >= min_peers.max(1))
        .map(|(a, ks)| (a.to_string(), ks.iter().sum::<f64>() / ks.len() as f64))
        .collect()
}

pub fn reliable_annotators(kappas: &BTreeMap<String, f64>, cutoff: f64) -> Vec<String> {
    kappas
        .iter()
        .filter(|(_, k)| **k >= cutoff)
        .map(|(a, _)| a.clone())
        .collect()
}

/// Splits every item's judgments into two random halves of `per_half` and
/// returns the majority label of each half, item by item.
pub fn split_halves(set: &AnnotationSet, per_half: usize, seed: u64) -> Result<(Vec<bool>, Vec<bool>), EvalError> {
    if set.is_empty() {
        return Err(EvalError::Empty("annotation set"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut left, mut right) = (Vec::with_capacity(set.len()), Vec::with_capacity(set.len()));
    for ((comment_id, key_point_id), judgments) in &set.items {
        if judgments.len() != 2 * per_half {
            return Err(EvalError::WrongRatingCount {
                comment_id: comment_id.clone(),
                key_point_id: key_point_id.clone(),
                expected: 2 * per_half,
                found: judgments.len(),
            });
        }
        let mut shuffled: Vec<Judgment> = judgments.values().copied().collect();
        shuffled.shuffle(&mut rng);
        left.push(majority_label(&shuffled[..per_half]));
        right.push(majority_label(&shuffled[per_half..]));
    }
    Ok((left, right))
}

/// Cohen's kappa between the majority labels of two random 7-annotator halves.
pub fn split_consistency(set: &AnnotationSet, seed: u64) -> Result<f64, EvalError> {
    let (a, b) = split_halves(set, 7, seed)?;
    cohen_kappa(&a, &b)
}
