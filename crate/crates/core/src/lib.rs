//! Key point analysis.
//!
//! Extracts short, high quality key points from a collection of comments,
//! matches every comment to the extracted key points and reports the
//! prevalence of each key point. The crate also carries the evaluation
//! machinery used to judge matching models and analysis output: policy
//! metrics with threshold tuning, precision at coverage, and annotator
//! agreement statistics.
//!
//! The main entry point is [`pipeline::run_analysis`]. Scoring is pluggable
//! through the [`scoring::MatchScorer`] and [`scoring::QualityScorer`]
//! traits.

pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod ingest;
pub mod pipeline;
pub mod policies;
pub mod scoring;
pub mod selection;

pub use error::{Error, Result};
pub use evaluation::{CoverageCurve, LabeledPair};
pub use extraction::{CandidateConfig, KeyPointCandidate};
pub use ingest::{Comment, Dataset, Domain, FilterConfig, Stance};
pub use pipeline::{AnalysisConfig, AnalysisResult};
pub use policies::{Policy, PolicyKind};
pub use scoring::{MatchScorer, QualityScorer};
pub use selection::{KeyPoint, KeyPointResult};
