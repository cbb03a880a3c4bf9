use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EvalError, LabeledPair};
use crate::policies::{best_match, Policy, PolicyKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], gold: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in predicted.iter().zip(gold) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn metrics(&self) -> Result<ConfusionMetrics, EvalError> {
        confusion_metrics(self.tp, self.fp, self.fn_, self.tn)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy, precision, recall and F1. Precision and recall are 0 when
/// undefined, and F1 is 0 when both are 0.
pub fn confusion_metrics(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<ConfusionMetrics, EvalError> {
    let total = tp + fp + fn_ + tn;
    if total == 0 {
        return Err(EvalError::Empty("confusion table"));
    }
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = div(tp, tp + fp);
    let recall = div(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ConfusionMetrics {
        accuracy: div(tp + tn, total),
        precision,
        recall,
        f1,
    })
}

/// Predicted labels for scored pairs under `policy`. Best-match policies
/// group pairs by (topic, comment text); ties go to the smallest key point
/// text.
pub fn predict(pairs: &[LabeledPair], policy: &Policy) -> Result<Vec<bool>, EvalError> {
    let scores: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| p.score.ok_or(EvalError::MissingScore(i)))
        .collect::<Result<_, _>>()?;
    let mut predicted = vec![false; pairs.len()];
    match *policy {
        Policy::Threshold(t) => {
            for (p, s) in predicted.iter_mut().zip(&scores) {
                *p = *s > t;
            }
        }
        Policy::BestMatch | Policy::BestMatchThreshold(_) => {
            let t = policy.threshold();
            let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
            for (i, p) in pairs.iter().enumerate() {
                groups
                    .entry((p.topic.as_str(), p.comment_text.as_str()))
                    .or_default()
                    .push(i);
            }
            for members in groups.values() {
                let ((_, best), s) = best_match(
                    members
                        .iter()
                        .map(|&i| ((pairs[i].key_point_text.as_str(), i), scores[i])),
                )
                .expect("groups are non-empty");
                predicted[best] = t.is_none_or(|t| s > t);
            }
        }
    }
    Ok(predicted)
}

pub fn evaluate_policy(pairs: &[LabeledPair], policy: &Policy) -> Result<Confusion, EvalError> {
    let predicted = predict(pairs, policy)?;
    let gold: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    Ok(Confusion::from_predictions(&predicted, &gold))
}

/// Candidate thresholds: 0, 1 and the midpoints between consecutive distinct
/// scores, ascending.
fn candidate_thresholds(scores: &[f64]) -> Vec<f64> {
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = vec![0.0];
    out.extend(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Picks the lowest threshold maximizing F1 on `dev` for a thresholded
/// policy. Returns `(threshold, f1)`.
pub fn tune_threshold(dev: &[LabeledPair], kind: PolicyKind) -> Result<(f64, f64), EvalError> {
    if dev.is_empty() {
        return Err(EvalError::Empty("dev set"));
    }
    if !kind.needs_threshold() {
        return Err(EvalError::UnsupportedPolicy(kind));
    }
    let scores: Vec<f64> = dev
        .iter()
        .enumerate()
        .map(|(i, p)| p.score.ok_or(EvalError::MissingScore(i)))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, f64)> = None;
    for t in candidate_thresholds(&scores) {
        let policy = Policy::new(kind, Some(t))?;
        let f1 = evaluate_policy(dev, &policy)?.metrics()?.f1;
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((t, f1));
        }
    }
    Ok(best.expect("at least two candidate thresholds"))
}
