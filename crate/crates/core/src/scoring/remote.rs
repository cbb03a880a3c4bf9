//! Client for the model sidecar.
//!
//! Wire protocol, JSON over HTTP/1.1:
//!
//! ```text
//! POST /v1/match_scores  {"pairs": [{"comment": .., "key_point": .., "topic": ..}]}  ->  {"scores": [..]}
//! POST /v1/quality       {"items": [{"text": .., "topic": ..}]}                       ->  {"scores": [..]}
//! ```
//!
//! Scores are positional and must lie in `[0, 1]`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{MatchScorer, QualityItem, QualityScorer, ScoreError, ScorePair};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WirePair {
    pub comment: String,
    pub key_point: String,
    pub topic: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatchScoresRequest {
    pub pairs: Vec<WirePair>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireItem {
    pub text: String,
    pub topic: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QualityRequest {
    pub items: Vec<WireItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoresResponse {
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub batch_size: usize,
    pub max_retries: u32,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            batch_size: 64,
            max_retries: 3,
            backoff: Duration::from_millis(200),
            timeout: Duration::from_secs(60),
        }
    }
}

type Key = (String, String, String);

pub struct RemoteScorer {
    endpoint: String,
    config: RemoteConfig,
    agent: ureq::Agent,
    match_cache: RwLock<HashMap<Key, f64>>,
    quality_cache: RwLock<HashMap<(String, String), f64>>,
    requests: AtomicU64,
}

enum Attempt {
    Retry(ScoreError),
    Fail(ScoreError),
}

impl RemoteScorer {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self::with_config(endpoint, RemoteConfig::default())
    }

    pub fn with_config(endpoint: impl Into<String>, config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteScorer {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            config: RemoteConfig {
                batch_size: config.batch_size.max(1),
                ..config
            },
            agent,
            match_cache: RwLock::new(HashMap::new()),
            quality_cache: RwLock::new(HashMap::new()),
            requests: AtomicU64::new(0),
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Number of HTTP requests issued so far, retries included.
    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn post_once<B: Serialize>(&self, url: &str, body: &B, expected: usize) -> Result<Vec<f64>, Attempt> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut resp = self
            .agent
            .post(url)
            .send_json(body)
            .map_err(|e| Attempt::Retry(ScoreError::Transport(e.to_string())))?;
        let status = resp.status().as_u16();
        if status >= 500 || status == 429 {
            return Err(Attempt::Retry(ScoreError::Transport(format!("{url} returned {status}"))));
        }
        if status >= 400 {
            return Err(Attempt::Fail(ScoreError::Protocol(format!("{url} rejected the request with {status}"))));
        }
        let parsed: ScoresResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| Attempt::Fail(ScoreError::Protocol(format!("bad response body: {e}"))))?;
        if parsed.scores.len() != expected {
            return Err(Attempt::Fail(ScoreError::Protocol(format!(
                "expected {expected} scores, got {}",
                parsed.scores.len()
            ))));
        }
        for (i, s) in parsed.scores.iter().enumerate() {
            if !(0.0..=1.0).contains(s) {
                return Err(Attempt::Fail(ScoreError::Protocol(format!(
                    "score {s} at position {i} outside [0, 1]"
                ))));
            }
        }
        Ok(parsed.scores)
    }

    fn post<B: Serialize>(&self, path: &str, body: &B, expected: usize) -> Result<Vec<f64>, ScoreError> {
        let url = format!("{}{}", self.endpoint, path);
        let mut attempt = 0;
        loop {
            match self.post_once(&url, body, expected) {
                Ok(scores) => return Ok(scores),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    if attempt >= self.config.max_retries {
                        return Err(e);
                    }
                    thread::sleep(self.config.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

impl MatchScorer for RemoteScorer {
    fn score(&self, comment: &str, key_point: &str, topic: &str) -> Result<f64, ScoreError> {
        Ok(self.score_batch(&[ScorePair::new(comment, key_point, topic)])?[0])
    }

    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScoreError> {
        let key = |p: &ScorePair<'_>| (p.comment.to_string(), p.key_point.to_string(), p.topic.to_string());
        let mut out: Vec<Option<f64>> = {
            let cache = self.match_cache.read().expect("remote cache poisoned");
            pairs.iter().map(|p| cache.get(&key(p)).copied()).collect()
        };
        let mut missing: Vec<usize> = Vec::new();
        let mut queued = HashMap::new();
        for i in 0..pairs.len() {
            if out[i].is_none() && queued.insert(key(&pairs[i]), i).is_none() {
                missing.push(i);
            }
        }
        for chunk in missing.chunks(self.config.batch_size) {
            let body = MatchScoresRequest {
                pairs: chunk
                    .iter()
                    .map(|&i| WirePair {
                        comment: pairs[i].comment.to_string(),
                        key_point: pairs[i].key_point.to_string(),
                        topic: pairs[i].topic.to_string(),
                    })
                    .collect(),
            };
            let scores = self
                .post("/v1/match_scores", &body, chunk.len())
                .map_err(|e| e.at(chunk[0]))?;
            let mut cache = self.match_cache.write().expect("remote cache poisoned");
            for (&i, s) in chunk.iter().zip(scores) {
                cache.insert(key(&pairs[i]), s);
            }
        }
        if !missing.is_empty() {
            let cache = self.match_cache.read().expect("remote cache poisoned");
            for (i, slot) in out.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = cache.get(&key(&pairs[i])).copied();
                }
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every pair scored")).collect())
    }
}

impl QualityScorer for RemoteScorer {
    fn quality(&self, text: &str, topic: &str) -> Result<f64, ScoreError> {
        Ok(self.quality_batch(&[QualityItem { text, topic }])?[0])
    }

    fn quality_batch(&self, items: &[QualityItem<'_>]) -> Result<Vec<f64>, ScoreError> {
        let key = |it: &QualityItem<'_>| (it.text.to_string(), it.topic.to_string());
        let mut out: Vec<Option<f64>> = {
            let cache = self.quality_cache.read().expect("remote cache poisoned");
            items.iter().map(|it| cache.get(&key(it)).copied()).collect()
        };
        let mut queued = HashMap::new();
        let missing: Vec<usize> = (0..items.len())
            .filter(|&i| out[i].is_none() && queued.insert(key(&items[i]), i).is_none())
            .collect();
        for chunk in missing.chunks(self.config.batch_size) {
            let body = QualityRequest {
                items: chunk
                    .iter()
                    .map(|&i| WireItem {
                        text: items[i].text.to_string(),
                        topic: items[i].topic.to_string(),
                    })
                    .collect(),
            };
            let scores = self.post("/v1/quality", &body, chunk.len()).map_err(|e| e.at(chunk[0]))?;
            let mut cache = self.quality_cache.write().expect("remote cache poisoned");
            for (&i, s) in chunk.iter().zip(scores) {
                cache.insert(key(&items[i]), s);
            }
        }
        let cache = self.quality_cache.read().expect("remote cache poisoned");
        for (i, slot) in out.iter_mut().enumerate() {
            if slot.is_none() {
                *slot = cache.get(&key(&items[i])).copied();
            }
        }
        Ok(out.into_iter().map(|s| s.expect("every item scored")).collect())
    }
}
