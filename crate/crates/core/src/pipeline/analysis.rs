use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::AnalysisConfig;
use crate::error::{Error, Result};
use crate::extraction::extract_candidates;
use crate::ingest::{filter_comments, Comment, Dataset, Stance};
use crate::scoring::{MatchScorer, QualityScorer};
use crate::selection::{
    assign_final, select_key_points_with, truncate_key_points, Item, KeyPoint, KeyPointResult, SelectionParams,
};

/// Analysis output for one topic, or one topic and stance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Stance>,
    /// Comments that passed the filters and were analysed.
    pub comment_count: usize,
    /// Ids of comments removed by the filters.
    pub filtered_out: Vec<String>,
    pub candidate_count: usize,
    /// Candidates over analysed comments.
    pub candidate_fraction: f64,
    /// Fraction of analysed comments matched to at least one key point.
    pub coverage: f64,
    pub key_points: Vec<KeyPointResult>,
    pub unmatched: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub dataset: String,
    pub config: AnalysisConfig,
    pub units: Vec<UnitResult>,
}

impl AnalysisResult {
    pub fn key_point_count(&self) -> usize {
        self.units.iter().map(|u| u.key_points.len()).sum()
    }

    pub fn unit(&self, topic: &str, stance: Option<Stance>) -> Option<&UnitResult> {
        self.units.iter().find(|u| u.topic == topic && u.stance == stance)
    }
}

type UnitKey = (usize, Option<Stance>);
/// Surviving comments and ids of filtered-out comments.
type UnitInput = (Vec<Comment>, Vec<String>);

/// Filters the dataset, then runs extraction, selection, truncation and
/// final matching independently for every topic (split by stance when
/// `per_stance` is set). Units come out in topic order, stances in
/// pro, con, neutral order.
pub fn run_analysis(
    dataset: &Dataset,
    cfg: &AnalysisConfig,
    matcher: &dyn MatchScorer,
    quality: &dyn QualityScorer,
) -> Result<AnalysisResult> {
    cfg.validate()?;
    if dataset.comments.is_empty() {
        return Err(Error::NoComments);
    }
    let survivors = filter_comments(&dataset.comments, &cfg.filter, Some(quality))?;
    let kept: HashSet<&str> = survivors.iter().map(|c| c.id.as_str()).collect();

    let topic_index: BTreeMap<&str, usize> = dataset
        .topics
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let key_of = |c: &Comment| -> UnitKey {
        let stance = if cfg.per_stance { c.stance } else { None };
        (topic_index[c.topic_id.as_str()], stance)
    };
    let mut units: BTreeMap<UnitKey, UnitInput> = BTreeMap::new();
    for c in &dataset.comments {
        let entry = units.entry(key_of(c)).or_default();
        if !kept.contains(c.id.as_str()) {
            entry.1.push(c.id.clone());
        }
    }
    for c in survivors {
        units.get_mut(&key_of(&c)).expect("unit exists").0.push(c);
    }

    let units: Vec<(UnitKey, UnitInput)> = units.into_iter().collect();
    let results = units
        .into_par_iter()
        .map(|((topic, stance), (comments, filtered_out))| {
            analyse_unit(&dataset.topics[topic], stance, comments, filtered_out, cfg, matcher, quality)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalysisResult {
        dataset: dataset.name.clone(),
        config: cfg.clone(),
        units: results,
    })
}

fn analyse_unit(
    topic: &str,
    stance: Option<Stance>,
    comments: Vec<Comment>,
    filtered_out: Vec<String>,
    cfg: &AnalysisConfig,
    matcher: &dyn MatchScorer,
    quality: &dyn QualityScorer,
) -> Result<UnitResult> {
    let candidates = extract_candidates(&comments, &cfg.candidates, quality)?;
    let items: Vec<Item> = comments.iter().map(Item::from).collect();
    let key_points: Vec<KeyPoint> = candidates.iter().map(KeyPoint::from).collect();
    let params = SelectionParams {
        threshold: cfg.selection_threshold,
        rematch_threshold: cfg.rematch_threshold(),
        rematch: true,
    };
    let selected = select_key_points_with(&items, &key_points, params, topic, matcher)?;
    let selected = truncate_key_points(selected, cfg.max_kps);

    let (key_points, unmatched) = if selected.is_empty() || items.is_empty() {
        (Vec::new(), items.iter().map(|i| i.id.clone()).collect())
    } else {
        let outcome = assign_final(selected, &items, &cfg.final_policy, topic, matcher)?;
        (outcome.key_points, outcome.unmatched)
    };
    let n = comments.len();
    let fraction = |part: usize| if n == 0 { 0.0 } else { part as f64 / n as f64 };
    Ok(UnitResult {
        topic: topic.to_string(),
        stance,
        comment_count: n,
        filtered_out,
        candidate_count: candidates.len(),
        candidate_fraction: fraction(candidates.len()),
        coverage: fraction(n - unmatched.len()),
        key_points,
        unmatched,
    })
}
