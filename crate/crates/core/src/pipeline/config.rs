use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::CandidateConfig;
use crate::ingest::{Domain, FilterConfig, IngestError};
use crate::policies::Policy;
use crate::scoring::{ConstantScorer, LexicalScorer, MatchScorer, QualityScorer, RemoteScorer, ScoreTable};

/// Where match and quality scores come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScorerSpec {
    /// A JSONL score table serving both match and quality scores.
    Table(PathBuf),
    /// Token overlap for matching and a constant 1 for quality.
    Lexical,
    /// The model sidecar at the given base URL.
    Remote(String),
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScorerSpec::Table(p) => write!(f, "table:{}", p.display()),
            ScorerSpec::Lexical => f.write_str("lexical"),
            ScorerSpec::Remote(url) => write!(f, "remote:{url}"),
        }
    }
}

impl FromStr for ScorerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "lexical" {
            return Ok(ScorerSpec::Lexical);
        }
        match s.split_once(':') {
            Some(("table", path)) if !path.is_empty() => Ok(ScorerSpec::Table(PathBuf::from(path))),
            Some(("remote", url)) if !url.is_empty() => Ok(ScorerSpec::Remote(url.to_string())),
            _ => Err(format!(
                "invalid scorer {s:?}: expected table:<path>, lexical or remote:<url>"
            )),
        }
    }
}

impl TryFrom<String> for ScorerSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ScorerSpec> for String {
    fn from(s: ScorerSpec) -> Self {
        s.to_string()
    }
}

/// A matched pair of scorers built from a [`ScorerSpec`].
#[derive(Clone)]
pub struct Scorers {
    pub matcher: Arc<dyn MatchScorer>,
    pub quality: Arc<dyn QualityScorer>,
}

impl Scorers {
    pub fn new(matcher: Arc<dyn MatchScorer>, quality: Arc<dyn QualityScorer>) -> Self {
        Scorers { matcher, quality }
    }

    /// Uses one value for both roles.
    pub fn shared<S: MatchScorer + QualityScorer + 'static>(scorer: S) -> Self {
        let scorer = Arc::new(scorer);
        Scorers {
            matcher: scorer.clone(),
            quality: scorer,
        }
    }
}

impl ScorerSpec {
    /// Tables are loaded strict: a lookup miss is an error.
    pub fn build(&self) -> Result<Scorers> {
        Ok(match self {
            ScorerSpec::Table(path) => {
                let table = ScoreTable::load(path).map_err(|e| match e {
                    IngestError::Io(source) => Error::io(format!("reading score table {}", path.display()), source),
                    e => e.into(),
                })?;
                Scorers::shared(table.strict(true))
            }
            ScorerSpec::Lexical => Scorers::new(Arc::new(LexicalScorer), Arc::new(ConstantScorer(1.0))),
            ScorerSpec::Remote(url) => Scorers::shared(RemoteScorer::new(url.clone())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub domain: Domain,
    pub filter: FilterConfig,
    pub candidates: CandidateConfig,
    pub selection_threshold: f64,
    /// Threshold for re-matching removed candidates. Defaults to
    /// `selection_threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rematch_threshold: Option<f64>,
    pub max_kps: usize,
    pub final_policy: Policy,
    pub scorer: ScorerSpec,
    pub seed: u64,
    pub per_stance: bool,
}

impl AnalysisConfig {
    pub fn for_domain(domain: Domain) -> Self {
        let (selection_threshold, max_kps) = match domain {
            Domain::Arguments => (0.856, 10),
            Domain::Survey => (0.856, 20),
            Domain::Reviews => (0.999, 2),
        };
        AnalysisConfig {
            domain,
            filter: FilterConfig::for_domain(domain),
            candidates: CandidateConfig::for_domain(domain),
            selection_threshold,
            rematch_threshold: None,
            max_kps,
            final_policy: Policy::BestMatch,
            scorer: ScorerSpec::Lexical,
            seed: 0,
            per_stance: domain == Domain::Arguments,
        }
    }

    pub fn rematch_threshold(&self) -> f64 {
        self.rematch_threshold.unwrap_or(self.selection_threshold)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("selection_threshold", Some(self.selection_threshold)),
            ("rematch_threshold", self.rematch_threshold),
        ] {
            if let Some(t) = t {
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Config(format!("{name} {t} outside [0, 1]")));
                }
            }
        }
        if self.max_kps < 1 {
            return Err(Error::Config("max_kps must be at least 1".into()));
        }
        self.filter.validate()?;
        self.candidates.validate().map_err(Error::Config)?;
        Ok(())
    }

    /// Parses a TOML config. The `profile` key (or `domain`, or the given
    /// fallback) selects the per-domain defaults; every other key overrides
    /// them. Nested `filter` and `candidates` tables are merged key by key.
    pub fn from_toml_str(text: &str, fallback: Option<Domain>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let profile = match table.remove("profile") {
            Some(toml::Value::String(s)) => Some(s.parse::<Domain>().map_err(Error::Config)?),
            Some(other) => return Err(Error::Config(format!("profile must be a string, got {other}"))),
            None => None,
        };
        let named = match table.get("domain") {
            Some(toml::Value::String(s)) => Some(s.parse::<Domain>().map_err(Error::Config)?),
            Some(other) => return Err(Error::Config(format!("domain must be a string, got {other}"))),
            None => None,
        };
        let domain = profile
            .or(named)
            .or(fallback)
            .ok_or_else(|| Error::Config("config names no profile or domain".into()))?;

        let mut merged = toml::Table::try_from(AnalysisConfig::for_domain(domain))
            .map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in table {
            match (merged.get_mut(&key), value) {
                (Some(toml::Value::Table(base)), toml::Value::Table(over)) if key != "final_policy" => {
                    base.extend(over);
                }
                (_, value) => {
                    merged.insert(key, value);
                }
            }
        }
        let cfg: AnalysisConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>, fallback: Option<Domain>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text, fallback)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
