use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::folds::{Fold, FoldSpec};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_policy, tune_threshold, Confusion, ConfusionMetrics, EvalError, LabeledPair};
use crate::policies::{Policy, PolicyKind};
use crate::scoring::{score_pairs, MatchScorer, ScorePair};

/// Builds the scorer for fold `i`.
pub type ScorerProvider<'a> = dyn Fn(usize, &Fold) -> Result<Arc<dyn MatchScorer>> + 'a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFoldResult {
    pub policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_f1: Option<f64>,
    pub confusion: Confusion,
    pub metrics: ConfusionMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub results: Vec<PolicyFoldResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAverage {
    pub policy: PolicyKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub folds: Vec<FoldResult>,
    pub average: Vec<PolicyAverage>,
}

impl MetricsTable {
    /// One row per policy with fold-averaged metrics.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8}{:>10}{:>8}{:>8}{:>8}", "policy", "accuracy", "P", "R", "F1");
        for row in &self.average {
            let _ = writeln!(
                out,
                "{:<8}{:>10.3}{:>8.3}{:>8.3}{:>8.3}",
                row.policy.as_str(),
                row.accuracy,
                row.precision,
                row.recall,
                row.f1
            );
        }
        out
    }
}

fn scored(pairs: &[&LabeledPair], scorer: &dyn MatchScorer) -> Result<Vec<LabeledPair>> {
    let requests: Vec<ScorePair<'_>> = pairs
        .iter()
        .map(|p| ScorePair::new(&p.comment_text, &p.key_point_text, &p.topic))
        .collect();
    let scores = score_pairs(scorer, &requests)?;
    Ok(pairs
        .iter()
        .zip(scores)
        .map(|(p, s)| (*p).clone().with_score(s))
        .collect())
}

/// Cross-validates a matching model. For every fold the dev and test pairs
/// are scored with that fold's scorer, thresholds are tuned on dev for the
/// thresholded policies, and every policy is applied to test.
pub fn run_matching_eval(
    pairs: &[LabeledPair],
    folds: &FoldSpec,
    scorer_for_fold: &ScorerProvider<'_>,
    policies: &[PolicyKind],
) -> Result<MetricsTable> {
    if pairs.is_empty() {
        return Err(EvalError::Empty("pairs").into());
    }
    if policies.is_empty() {
        return Err(Error::Config("no policies to evaluate".into()));
    }
    let topics: BTreeSet<&str> = pairs.iter().map(|p| p.topic.as_str()).collect();
    folds.validate(topics.iter().copied())?;

    let mut fold_results = Vec::with_capacity(folds.folds.len());
    for (i, fold) in folds.folds.iter().enumerate() {
        let scorer = scorer_for_fold(i, fold)?;
        let select = |set: &[String]| -> Vec<&LabeledPair> {
            pairs.iter().filter(|p| set.contains(&p.topic)).collect()
        };
        let dev = scored(&select(&fold.dev), scorer.as_ref())?;
        let test = scored(&select(&fold.test), scorer.as_ref())?;
        if test.is_empty() {
            return Err(Error::Config(format!("fold {i}: no test pairs")));
        }
        let mut results = Vec::with_capacity(policies.len());
        for &kind in policies {
            let (policy, dev_f1) = if kind.needs_threshold() {
                let (t, f1) = tune_threshold(&dev, kind)?;
                (Policy::new(kind, Some(t))?, Some(f1))
            } else {
                (Policy::new(kind, None)?, None)
            };
            let confusion = evaluate_policy(&test, &policy)?;
            results.push(PolicyFoldResult {
                policy: kind,
                threshold: policy.threshold(),
                dev_f1,
                confusion,
                metrics: confusion.metrics()?,
            });
        }
        fold_results.push(FoldResult { fold: i, results });
    }

    let n = fold_results.len() as f64;
    let average = policies
        .iter()
        .enumerate()
        .map(|(j, &policy)| {
            let mean = |f: fn(&ConfusionMetrics) -> f64| {
                fold_results.iter().map(|fr| f(&fr.results[j].metrics)).sum::<f64>() / n
            };
            PolicyAverage {
                policy,
                accuracy: mean(|m| m.accuracy),
                precision: mean(|m| m.precision),
                recall: mean(|m| m.recall),
                f1: mean(|m| m.f1),
            }
        })
        .collect();
    Ok(MetricsTable {
        folds: fold_results,
        average,
    })
}
