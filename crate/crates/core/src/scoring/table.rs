use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_range, MatchScorer, QualityScorer, ScoreError};
use crate::evaluation::LabeledPair;
use crate::ingest::IngestError;

/// One line of a score table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScoreRecord {
    Match {
        comment: String,
        key_point: String,
        topic: String,
        score: f64,
    },
    Quality {
        text: String,
        topic: String,
        quality: f64,
    },
}

type PairMap = HashMap<String, HashMap<String, HashMap<String, f64>>>;

/// Precomputed scores keyed by exact text.
///
/// Unknown pairs score `default_score` unless the table is strict, in which
/// case the lookup fails.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    matches: PairMap,
    quality: HashMap<String, HashMap<String, f64>>,
    default_score: f64,
    strict: bool,
}

impl Default for ScoreTable {
    fn default() -> Self {
        ScoreTable::new()
    }
}

impl ScoreTable {
    pub fn new() -> Self {
        ScoreTable {
            matches: HashMap::new(),
            quality: HashMap::new(),
            default_score: 0.0,
            strict: false,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn with_default(mut self, default_score: f64) -> Result<Self, ScoreError> {
        self.default_score = check_range(default_score)?;
        Ok(self)
    }

    pub fn insert(&mut self, comment: &str, key_point: &str, topic: &str, score: f64) -> Result<(), ScoreError> {
        let score = check_range(score)?;
        self.matches
            .entry(topic.to_string())
            .or_default()
            .entry(comment.to_string())
            .or_default()
            .insert(key_point.to_string(), score);
        Ok(())
    }

    pub fn insert_quality(&mut self, text: &str, topic: &str, quality: f64) -> Result<(), ScoreError> {
        let quality = check_range(quality)?;
        self.quality
            .entry(topic.to_string())
            .or_default()
            .insert(text.to_string(), quality);
        Ok(())
    }

    pub fn get(&self, comment: &str, key_point: &str, topic: &str) -> Option<f64> {
        self.matches.get(topic)?.get(comment)?.get(key_point).copied()
    }

    pub fn len(&self) -> usize {
        self.matches
            .values()
            .flat_map(|m| m.values())
            .map(HashMap::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, IngestError> {
        let mut table = ScoreTable::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| IngestError::Parse {
                line: idx + 1,
                message,
            };
            let record: ScoreRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            table.add_record(&record).map_err(|e| parse_err(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn add_record(&mut self, record: &ScoreRecord) -> Result<(), ScoreError> {
        match record {
            ScoreRecord::Match {
                comment,
                key_point,
                topic,
                score,
            } => self.insert(comment, key_point, topic, *score),
            ScoreRecord::Quality { text, topic, quality } => self.insert_quality(text, topic, *quality),
        }
    }

    /// Writes the table in file order sorted by key, one record per line.
    pub fn write(&self, mut writer: impl Write) -> std::io::Result<()> {
        let mut records = Vec::new();
        for (topic, by_comment) in &self.matches {
            for (comment, by_kp) in by_comment {
                for (kp, score) in by_kp {
                    records.push(ScoreRecord::Match {
                        comment: comment.clone(),
                        key_point: kp.clone(),
                        topic: topic.clone(),
                        score: *score,
                    });
                }
            }
        }
        for (topic, by_text) in &self.quality {
            for (text, q) in by_text {
                records.push(ScoreRecord::Quality {
                    text: text.clone(),
                    topic: topic.clone(),
                    quality: *q,
                });
            }
        }
        let mut lines: Vec<String> = records
            .iter()
            .map(|r| serde_json::to_string(r).expect("score records serialize"))
            .collect();
        lines.sort();
        for line in lines {
            writeln!(writer, "{line}")?;
        }
        Ok(())
    }

    /// A table scoring every labeled pair 1.0 when it matches and 0.0 otherwise.
    pub fn gold(pairs: &[LabeledPair]) -> Self {
        let mut table = ScoreTable::new();
        for p in pairs {
            let score = if p.label { 1.0 } else { 0.0 };
            table
                .insert(&p.comment_text, &p.key_point_text, &p.topic, score)
                .expect("gold scores are in range");
        }
        table
    }

    /// A table built from the score column of labeled pairs. Pairs without a
    /// score are skipped.
    pub fn from_pair_scores(pairs: &[LabeledPair]) -> Result<Self, ScoreError> {
        let mut table = ScoreTable::new();
        for p in pairs {
            if let Some(s) = p.score {
                table.insert(&p.comment_text, &p.key_point_text, &p.topic, s)?;
            }
        }
        Ok(table)
    }
}

impl MatchScorer for ScoreTable {
    fn score(&self, comment: &str, key_point: &str, topic: &str) -> Result<f64, ScoreError> {
        match self.get(comment, key_point, topic) {
            Some(s) => Ok(s),
            None if self.strict => Err(ScoreError::MissingPair {
                comment: comment.to_string(),
                key_point: key_point.to_string(),
                topic: topic.to_string(),
            }),
            None => Ok(self.default_score),
        }
    }
}

impl QualityScorer for ScoreTable {
    fn quality(&self, text: &str, topic: &str) -> Result<f64, ScoreError> {
        match self.quality.get(topic).and_then(|m| m.get(text)) {
            Some(q) => Ok(*q),
            None if self.strict => Err(ScoreError::MissingQuality {
                text: text.to_string(),
                topic: topic.to_string(),
            }),
            None => Ok(self.default_score),
        }
    }
}
