//! Precision at coverage.
//!
//! Every comment of a labeled sample is mapped to its best matching key point
//! and the mapping is judged correct or not. Raising a threshold on the match
//! score trades coverage (fraction of comments still mapped) for precision
//! (fraction of mapped comments mapped correctly). Precision at coverage `c`
//! is the best precision over all thresholds whose coverage is at least `c`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use super::EvalError;
use crate::policies::best_match;

/// Slack for comparing a realized coverage fraction against a level.
const COVERAGE_EPS: f64 = 1e-12;

pub fn default_levels() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub levels: Vec<f64>,
    pub precision_at: Vec<f64>,
    /// Threshold realizing each precision value. `None` means no threshold:
    /// every comment is covered.
    pub thresholds_at: Vec<Option<f64>>,
}

struct OperatingPoint {
    threshold: Option<f64>,
    covered: usize,
    correct: usize,
}

fn operating_points(sample: &[(bool, f64)]) -> Vec<OperatingPoint> {
    let mut sorted: Vec<(bool, f64)> = sample.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut points = Vec::new();
    let mut correct = 0;
    for (i, (label, score)) in sorted.iter().enumerate() {
        correct += usize::from(*label);
        match sorted.get(i + 1) {
            Some((_, next)) if next < score => points.push(OperatingPoint {
                threshold: Some((score + next) / 2.0),
                covered: i + 1,
                correct,
            }),
            Some(_) => {}
            None => points.push(OperatingPoint {
                threshold: None,
                covered: i + 1,
                correct,
            }),
        }
    }
    points
}

pub fn precision_at_coverage(sample: &[(bool, f64)], levels: &[f64]) -> Result<CoverageCurve, EvalError> {
    if sample.is_empty() {
        return Err(EvalError::Empty("sample"));
    }
    if levels.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
        return Err(EvalError::InvalidLevels("levels must lie in (0, 1]".into()));
    }
    if levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::InvalidLevels("levels must be sorted ascending".into()));
    }
    let n = sample.len() as f64;
    let points = operating_points(sample);
    let mut precision_at = Vec::with_capacity(levels.len());
    let mut thresholds_at = Vec::with_capacity(levels.len());
    for &c in levels {
        let mut best: Option<(f64, usize, Option<f64>)> = None;
        for p in &points {
            if (p.covered as f64 / n) + COVERAGE_EPS < c {
                continue;
            }
            let precision = p.correct as f64 / p.covered as f64;
            let better = match best {
                None => true,
                Some((bp, bc, _)) => precision > bp || (precision == bp && p.covered > bc),
            };
            if better {
                best = Some((precision, p.covered, p.threshold));
            }
        }
        // The point covering every comment always qualifies.
        let (precision, _, threshold) = best.expect("full coverage point exists");
        precision_at.push(precision);
        thresholds_at.push(threshold);
    }
    Ok(CoverageCurve {
        levels: levels.to_vec(),
        precision_at,
        thresholds_at,
    })
}

fn bool_or_int<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bool(bool),
        Int(u8),
    }
    match Raw::deserialize(d)? {
        Raw::Bool(b) => Ok(b),
        Raw::Int(1) => Ok(true),
        Raw::Int(0) => Ok(false),
        Raw::Int(other) => Err(serde::de::Error::custom(format!("label {other} is not 0 or 1"))),
    }
}

/// One labeled (comment, key point) judgment of an analysis sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub comment_id: String,
    pub key_point_id: String,
    pub score: f64,
    #[serde(deserialize_with = "bool_or_int")]
    pub label: bool,
}

pub fn load_sample(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>, EvalError> {
    read_sample(BufReader::new(File::open(path)?))
}

pub fn read_sample(reader: impl BufRead) -> Result<Vec<SampleRecord>, EvalError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&record.score) {
            return Err(EvalError::Parse {
                line: idx + 1,
                message: format!("score {} outside [0, 1]", record.score),
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Keeps each comment's best scoring record (ties to the smallest key point
/// id) and returns `(label, score)` per comment, ordered by comment id.
pub fn best_match_sample(records: &[SampleRecord]) -> Vec<(bool, f64)> {
    let mut by_comment: BTreeMap<&str, Vec<&SampleRecord>> = BTreeMap::new();
    for r in records {
        by_comment.entry(r.comment_id.as_str()).or_default().push(r);
    }
    by_comment
        .values()
        .map(|rs| {
            let ((_, label), score) = best_match(rs.iter().map(|r| ((r.key_point_id.as_str(), r.label), r.score)))
                .expect("non-empty group");
            (label, score)
        })
        .collect()
}
