//! Dataset loading, text normalization and corpus-level comment filters.
//!
//! Comments arrive as line-delimited JSON records:
//!
//! ```text
//! {"id": "c1", "topic": "t1", "stance": "pro", "text": "The city needs more parks."}
//! ```
//!
//! `stance` is optional except for the arguments domain, and an optional
//! `quality` field carries a precomputed quality score. Labeled
//! (comment, key point) pairs are read from a delimited file with the header
//! `topic,stance,comment_text,key_point_text,label` and an optional trailing
//! `score` column.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::LabeledPair;
use crate::scoring::{QualityItem, QualityScorer, ScoreError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty comment")]
    EmptyComment,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid filter configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Pro,
    Con,
    #[serde(rename = "none")]
    Neutral,
}

impl Stance {
    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Pro => "pro",
            Stance::Con => "con",
            Stance::Neutral => "none",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pro" => Ok(Stance::Pro),
            "con" => Ok(Stance::Con),
            "none" | "" => Ok(Stance::Neutral),
            other => Err(format!("unknown stance {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Arguments,
    Survey,
    Reviews,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Arguments => "arguments",
            Domain::Survey => "survey",
            Domain::Reviews => "reviews",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arguments" => Ok(Domain::Arguments),
            "survey" => Ok(Domain::Survey),
            "reviews" => Ok(Domain::Reviews),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

/// One input utterance.
///
/// `analysis_text` is the text the analysis works on. It equals `raw_text`
/// except for survey data, where only the first sentence is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub topic_id: String,
    pub stance: Option<Stance>,
    pub raw_text: String,
    pub analysis_text: String,
    pub quality: Option<f64>,
}

impl Comment {
    /// Builds a comment whose analysis text is the raw text.
    pub fn new(
        id: impl Into<String>,
        topic_id: impl Into<String>,
        stance: Option<Stance>,
        text: impl Into<String>,
    ) -> Self {
        let raw_text = text.into();
        Comment {
            id: id.into(),
            topic_id: topic_id.into(),
            stance,
            analysis_text: raw_text.clone(),
            raw_text,
            quality: None,
        }
    }

    /// Builds a comment applying the domain's text normalization.
    pub fn for_domain(
        id: impl Into<String>,
        topic_id: impl Into<String>,
        stance: Option<Stance>,
        text: impl Into<String>,
        domain: Domain,
    ) -> Result<Self, IngestError> {
        let mut comment = Comment::new(id, topic_id, stance, text);
        comment.analysis_text = match domain {
            Domain::Survey => first_sentence(&comment.raw_text)?.to_string(),
            _ => {
                if comment.raw_text.trim().is_empty() {
                    return Err(IngestError::EmptyComment);
                }
                comment.raw_text.trim().to_string()
            }
        };
        Ok(comment)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub domain: Domain,
    pub topics: Vec<String>,
    pub comments: Vec<Comment>,
}

impl Dataset {
    /// Builds a dataset, deriving the topic list in order of first appearance.
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        comments: Vec<Comment>,
    ) -> Result<Self, IngestError> {
        let mut topics = Vec::new();
        let mut seen = HashSet::new();
        for c in &comments {
            if seen.insert(c.topic_id.as_str()) {
                topics.push(c.topic_id.clone());
            }
        }
        let dataset = Dataset {
            name: name.into(),
            domain,
            topics,
            comments,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let topics: HashSet<&str> = self.topics.iter().map(String::as_str).collect();
        let mut ids = HashSet::new();
        for c in &self.comments {
            if !ids.insert(c.id.as_str()) {
                return Err(IngestError::InvalidDataset(format!("duplicate id {:?}", c.id)));
            }
            if !topics.contains(c.topic_id.as_str()) {
                return Err(IngestError::InvalidDataset(format!(
                    "comment {:?} references unknown topic {:?}",
                    c.id, c.topic_id
                )));
            }
            if c.analysis_text.trim().is_empty() {
                return Err(IngestError::InvalidDataset(format!("comment {:?} is empty", c.id)));
            }
            if let Some(q) = c.quality {
                if !(0.0..=1.0).contains(&q) {
                    return Err(IngestError::InvalidDataset(format!(
                        "comment {:?} has quality {q} outside [0, 1]",
                        c.id
                    )));
                }
            }
            if self.domain == Domain::Arguments
                && !matches!(c.stance, Some(Stance::Pro) | Some(Stance::Con))
            {
                return Err(IngestError::InvalidDataset(format!(
                    "argument {:?} needs a pro or con stance",
                    c.id
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn comment(&self, id: &str) -> Option<&Comment> {
        self.comments.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecileScope {
    Dataset,
    Topic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_chars: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub ascii_only: bool,
    pub first_sentence_only: bool,
    pub low_quality_fraction: f64,
    pub low_quality_scope: DecileScope,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_chars: 10,
            min_tokens: 4,
            max_tokens: 30,
            ascii_only: true,
            first_sentence_only: false,
            low_quality_fraction: 0.0,
            low_quality_scope: DecileScope::Dataset,
        }
    }
}

impl FilterConfig {
    pub fn for_domain(domain: Domain) -> Self {
        let base = FilterConfig::default();
        match domain {
            Domain::Arguments => FilterConfig {
                low_quality_fraction: 0.10,
                ..base
            },
            Domain::Survey => FilterConfig {
                first_sentence_only: true,
                ..base
            },
            Domain::Reviews => base,
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.min_chars < 1 {
            return Err(IngestError::Config("min_chars must be at least 1".into()));
        }
        if self.min_tokens > self.max_tokens {
            return Err(IngestError::Config(format!(
                "min_tokens {} exceeds max_tokens {}",
                self.min_tokens, self.max_tokens
            )));
        }
        if !(0.0..1.0).contains(&self.low_quality_fraction) {
            return Err(IngestError::Config(format!(
                "low_quality_fraction {} outside [0, 1)",
                self.low_quality_fraction
            )));
        }
        Ok(())
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00A1}'
        )
}

/// Whitespace tokens with leading and trailing punctuation stripped.
/// Tokens made only of punctuation are dropped.
pub fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(is_punct))
        .filter(|t| !t.is_empty())
}

pub fn token_count(text: &str) -> usize {
    tokens(text).count()
}

const ABBREVIATIONS: &[&str] = &[
    "e.g.", "i.e.", "etc.", "dr.", "mr.", "mrs.", "ms.", "vs.", "prof.", "st.", "jr.", "sr.",
    "approx.", "inc.", "ltd.", "co.", "u.s.",
];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(['(', '"', '\'', '[']);
    let lower = word.to_lowercase();
    ABBREVIATIONS.contains(&lower.as_str())
}

/// Returns the first sentence of `text`.
///
/// A sentence ends at a run of `.`, `!` or `?` (optionally followed by
/// closing quotes or brackets) that is followed by whitespace or the end of
/// the text. A single period closing a known abbreviation is not a boundary.
pub fn first_sentence(text: &str) -> Result<&str, IngestError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(IngestError::EmptyComment);
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '!' | '?') {
            j += 1;
        }
        let single_period = i == j && c == '.';
        while j + 1 < chars.len() && matches!(chars[j + 1].1, '"' | '\'' | ')' | ']' | '\u{2019}' | '\u{201D}') {
            j += 1;
        }
        let end = chars[j].0 + chars[j].1.len_utf8();
        if end == text.len() {
            return Ok(text);
        }
        if chars[j + 1].1.is_whitespace() {
            let word_start = text[..start]
                .rfind(char::is_whitespace)
                .map(|p| p + 1)
                .unwrap_or(0);
            if !(single_period && is_abbreviation(&text[word_start..=start])) {
                return Ok(&text[..end]);
            }
        }
        i = j + 1;
    }
    Ok(text)
}

fn passes_rules(comment: &Comment, cfg: &FilterConfig) -> bool {
    if cfg.ascii_only && !comment.raw_text.is_ascii() {
        return false;
    }
    let text = &comment.analysis_text;
    if text.chars().count() < cfg.min_chars {
        return false;
    }
    let n = token_count(text);
    n >= cfg.min_tokens && n <= cfg.max_tokens
}

/// Applies the character, token and ascii rules, then drops the
/// `floor(f * n)` lowest quality survivors when a low quality fraction `f`
/// is configured. Survivor order is preserved.
pub fn filter_comments(
    comments: &[Comment],
    cfg: &FilterConfig,
    quality: Option<&dyn QualityScorer>,
) -> Result<Vec<Comment>, IngestError> {
    cfg.validate()?;
    let mut survivors: Vec<Comment> = comments
        .iter()
        .filter(|c| passes_rules(c, cfg))
        .cloned()
        .collect();
    if cfg.low_quality_fraction <= 0.0 {
        return Ok(survivors);
    }
    let scorer = quality.ok_or_else(|| {
        IngestError::Config("low quality removal needs a quality scorer".into())
    })?;
    let items: Vec<QualityItem<'_>> = survivors
        .iter()
        .map(|c| QualityItem {
            text: &c.analysis_text,
            topic: &c.topic_id,
        })
        .collect();
    let scores = crate::scoring::score_quality(scorer, &items)?;
    for (c, q) in survivors.iter_mut().zip(scores) {
        c.quality = Some(q);
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in survivors.iter().enumerate() {
        let key = match cfg.low_quality_scope {
            DecileScope::Dataset => "",
            DecileScope::Topic => c.topic_id.as_str(),
        };
        groups.entry(key).or_default().push(i);
    }
    let mut removed = HashSet::new();
    for members in groups.values() {
        let k = (cfg.low_quality_fraction * members.len() as f64).floor() as usize;
        let mut ranked = members.clone();
        ranked.sort_by(|&a, &b| {
            let (ca, cb) = (&survivors[a], &survivors[b]);
            ca.quality
                .unwrap_or(0.0)
                .total_cmp(&cb.quality.unwrap_or(0.0))
                .then_with(|| ca.id.cmp(&cb.id))
        });
        removed.extend(ranked.into_iter().take(k));
    }
    Ok(survivors
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, c)| c)
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct CommentRecord {
    id: String,
    topic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stance: Option<String>,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quality: Option<f64>,
}

pub fn load_dataset(path: impl AsRef<Path>, domain: Domain) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), name, domain)
}

/// Parses line-delimited comment records.
pub fn read_dataset(
    reader: impl BufRead,
    name: impl Into<String>,
    domain: Domain,
) -> Result<Dataset, IngestError> {
    let mut comments = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse {
            line: line_no,
            message,
        };
        let record: CommentRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if seen.insert(record.id.clone(), line_no).is_some() {
            return Err(IngestError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        let stance = match &record.stance {
            Some(s) => Some(s.parse::<Stance>().map_err(parse_err)?),
            None => None,
        };
        if domain == Domain::Arguments && !matches!(stance, Some(Stance::Pro) | Some(Stance::Con)) {
            return Err(parse_err("arguments need a pro or con stance".into()));
        }
        if let Some(q) = record.quality {
            if !(0.0..=1.0).contains(&q) {
                return Err(parse_err(format!("quality {q} outside [0, 1]")));
            }
        }
        let mut comment = match Comment::for_domain(record.id, record.topic, stance, record.text, domain) {
            Ok(c) => c,
            Err(IngestError::EmptyComment) => return Err(parse_err("empty comment".into())),
            Err(e) => return Err(e),
        };
        comment.quality = record.quality;
        comments.push(comment);
    }
    Dataset::new(name, domain, comments)
}

/// Serializes a dataset in the comment-record format.
pub fn write_dataset(dataset: &Dataset, mut writer: impl Write) -> Result<(), IngestError> {
    for c in &dataset.comments {
        let record = CommentRecord {
            id: c.id.clone(),
            topic: c.topic_id.clone(),
            stance: c.stance.map(|s| s.to_string()),
            text: c.raw_text.clone(),
            quality: c.quality,
        };
        let line = serde_json::to_string(&record).map_err(|e| IngestError::InvalidDataset(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PairRecord {
    topic: String,
    #[serde(default)]
    stance: Option<String>,
    comment_text: String,
    key_point_text: String,
    label: String,
    #[serde(default)]
    score: Option<f64>,
}

pub fn load_labeled_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>, IngestError> {
    read_labeled_pairs(File::open(path)?)
}

pub fn read_labeled_pairs(reader: impl Read) -> Result<Vec<LabeledPair>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut pairs = Vec::new();
    for result in rdr.deserialize::<PairRecord>() {
        let record = result.map_err(|e| IngestError::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = pairs.len() + 2;
        let label = match record.label.as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(IngestError::Parse {
                    line,
                    message: format!("label {other:?} is not 1 or 0"),
                })
            }
        };
        let stance = match record.stance.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse::<Stance>().map_err(|message| IngestError::Parse { line, message })?),
        };
        if let Some(s) = record.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("score {s} outside [0, 1]"),
                });
            }
        }
        pairs.push(LabeledPair {
            comment_text: record.comment_text,
            key_point_text: record.key_point_text,
            topic: record.topic,
            stance,
            label,
            score: record.score,
        });
    }
    Ok(pairs)
}

/// Groups pairs by topic, keeping file order within each topic.
pub fn group_by_topic(pairs: &[LabeledPair]) -> BTreeMap<&str, Vec<&LabeledPair>> {
    let mut groups: BTreeMap<&str, Vec<&LabeledPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.topic.as_str()).or_default().push(p);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScoreTable;

    fn comment(id: &str, text: &str) -> Comment {
        Comment::new(id, "t", Some(Stance::Pro), text)
    }

    #[test]
    fn token_count_examples() {
        assert_eq!(token_count("Fix the roads, please!"), 4);
        assert_eq!(token_count(""), 0);
        assert_eq!(token_count("a b c d e"), 5);
        assert_eq!(token_count("well -- that is , it"), 4);
    }

    #[test]
    fn first_sentence_examples() {
        assert_eq!(first_sentence("Fix roads. Also taxes.").unwrap(), "Fix roads.");
        assert_eq!(first_sentence("No trailing period").unwrap(), "No trailing period");
        assert_eq!(first_sentence("What now? Who knows.").unwrap(), "What now?");
        assert!(matches!(first_sentence(""), Err(IngestError::EmptyComment)));
        assert!(matches!(first_sentence("   "), Err(IngestError::EmptyComment)));
    }

    #[test]
    fn first_sentence_guards() {
        assert_eq!(
            first_sentence("Add parks, e.g. near the river. Also trees.").unwrap(),
            "Add parks, e.g. near the river."
        );
        assert_eq!(first_sentence("Wait... what? Yes.").unwrap(), "Wait...");
        assert_eq!(
            first_sentence("He said \"stop.\" Then left.").unwrap(),
            "He said \"stop.\""
        );
        assert_eq!(first_sentence("Version 2.5 is out. Ok.").unwrap(), "Version 2.5 is out.");
    }

    #[test]
    fn filter_rules() {
        let cfg = FilterConfig::default();
        let out = filter_comments(&[comment("a", "héllo wörld today everyone")], &cfg, None).unwrap();
        assert!(out.is_empty());
        let out = filter_comments(&[comment("a", "Too short")], &cfg, None).unwrap();
        assert!(out.is_empty());
        let long = vec!["word"; 31].join(" ");
        let out = filter_comments(&[comment("a", &long), comment("b", "just three words")], &cfg, None).unwrap();
        assert!(out.is_empty());
        let ok = comment("a", "The city needs more parks");
        assert_eq!(filter_comments(std::slice::from_ref(&ok), &cfg, None).unwrap(), vec![ok]);
    }

    #[test]
    fn decile_removal_drops_lowest_quality() {
        let mut table = ScoreTable::new();
        let comments: Vec<Comment> = (0..20)
            .map(|i| {
                let c = comment(&format!("c{i:02}"), &format!("comment number {i} about parks"));
                table.insert_quality(&c.analysis_text, "t", (i as f64 + 1.0) / 21.0).unwrap();
                c
            })
            .collect();
        let cfg = FilterConfig::for_domain(Domain::Arguments);
        let out = filter_comments(&comments, &cfg, Some(&table)).unwrap();
        assert_eq!(out.len(), 18);
        assert!(out.iter().all(|c| c.id != "c00" && c.id != "c01"));
        let ids: Vec<&str> = out.iter().map(|c| c.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn decile_removal_needs_scorer() {
        let cfg = FilterConfig::for_domain(Domain::Arguments);
        let err = filter_comments(&[comment("a", "The city needs more parks")], &cfg, None).unwrap_err();
        assert!(matches!(err, IngestError::Config(_)));
    }

    #[test]
    fn decile_ties_break_by_id() {
        let mut table = ScoreTable::new();
        let comments: Vec<Comment> = ["z", "m", "a", "q", "b", "c", "d", "e", "f", "g"]
            .iter()
            .map(|id| comment(id, &format!("comment {id} has four tokens")))
            .collect();
        for c in &comments {
            table.insert_quality(&c.analysis_text, "t", 0.5).unwrap();
        }
        let out = filter_comments(&comments, &FilterConfig::for_domain(Domain::Arguments), Some(&table)).unwrap();
        assert_eq!(out.len(), 9);
        assert!(out.iter().all(|c| c.id != "a"));
    }

    #[test]
    fn per_topic_decile_scope() {
        let mut table = ScoreTable::new();
        let mut comments = Vec::new();
        for topic in ["t1", "t2"] {
            for i in 0..10 {
                let c = Comment::new(format!("{topic}-{i}"), topic, Some(Stance::Con), format!("a comment for {topic} number {i}"));
                let q = if topic == "t1" { 0.1 + i as f64 * 0.01 } else { 0.8 + i as f64 * 0.01 };
                table.insert_quality(&c.analysis_text, topic, q).unwrap();
                comments.push(c);
            }
        }
        let mut cfg = FilterConfig::for_domain(Domain::Arguments);
        cfg.low_quality_fraction = 0.2;
        let whole = filter_comments(&comments, &cfg, Some(&table)).unwrap();
        assert!(whole.iter().all(|c| c.id != "t1-0" && c.id != "t1-1" && c.id != "t1-2" && c.id != "t1-3"));
        cfg.low_quality_scope = DecileScope::Topic;
        let per_topic = filter_comments(&comments, &cfg, Some(&table)).unwrap();
        let removed: Vec<&str> = comments
            .iter()
            .filter(|c| !per_topic.iter().any(|s| s.id == c.id))
            .map(|c| c.id.as_str())
            .collect();
        assert_eq!(removed, vec!["t1-0", "t1-1", "t2-0", "t2-1"]);
    }

    #[test]
    fn load_dataset_shapes() {
        let data = r#"{"id":"c1","topic":"t","stance":"pro","text":"One comment here."}
{"id":"c2","topic":"t","stance":"con","text":"Another comment here."}

{"id":"c3","topic":"u","stance":"pro","text":"Third comment here."}
"#;
        let ds = read_dataset(data.as_bytes(), "x", Domain::Arguments).unwrap();
        assert_eq!(ds.comments.len(), 3);
        assert_eq!(ds.topics, vec!["t", "u"]);

        let dup = "{\"id\":\"c1\",\"topic\":\"t\",\"text\":\"a\"}\n{\"id\":\"c1\",\"topic\":\"t\",\"text\":\"b\"}\n";
        let err = read_dataset(dup.as_bytes(), "x", Domain::Reviews).unwrap_err();
        assert_eq!(err.to_string(), "duplicate id \"c1\" at line 2");

        let survey = "{\"id\":\"s1\",\"topic\":\"t\",\"text\":\"A. B.\"}\n";
        let ds = read_dataset(survey.as_bytes(), "x", Domain::Survey).unwrap();
        assert_eq!(ds.comments[0].analysis_text, "A.");
        assert_eq!(ds.comments[0].raw_text, "A. B.");
    }

    #[test]
    fn load_dataset_errors_carry_line() {
        let bad = "{\"id\":\"c1\",\"topic\":\"t\",\"text\":\"fine\"}\nnot json\n";
        match read_dataset(bad.as_bytes(), "x", Domain::Reviews) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let no_stance = "{\"id\":\"c1\",\"topic\":\"t\",\"text\":\"fine\"}\n";
        assert!(read_dataset(no_stance.as_bytes(), "x", Domain::Arguments).is_err());
    }

    #[test]
    fn labeled_pairs() {
        let data = "topic,stance,comment_text,key_point_text,label\n\
                    t1,pro,a,k,1\nt1,pro,b,k,0\nt2,con,c,k,1\nt2,,d,k,0\n";
        let pairs = read_labeled_pairs(data.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 4);
        let groups = group_by_topic(&pairs);
        let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2]);
        assert_eq!(pairs[3].stance, None);

        let bad = "topic,stance,comment_text,key_point_text,label\nt1,pro,a,k,maybe\n";
        assert!(matches!(read_labeled_pairs(bad.as_bytes()), Err(IngestError::Parse { .. })));

        assert!(read_labeled_pairs("".as_bytes()).unwrap().is_empty());
        assert!(read_labeled_pairs("topic,stance,comment_text,key_point_text,label\n".as_bytes())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn labeled_pairs_with_scores() {
        let data = "topic,stance,comment_text,key_point_text,label,score\nt1,pro,a,k,1,0.75\n";
        let pairs = read_labeled_pairs(data.as_bytes()).unwrap();
        assert_eq!(pairs[0].score, Some(0.75));
    }
}
