//! End-to-end orchestration: configuration, per topic(+stance) analysis,
//! the matching-model evaluation harness and report emission.

mod analysis;
mod config;
mod folds;
mod matching_eval;
mod report;

pub use analysis::{run_analysis, AnalysisResult, UnitResult};
pub use config::{AnalysisConfig, ScorerSpec, Scorers};
pub use folds::{Fold, FoldSpec};
pub use matching_eval::{run_matching_eval, FoldResult, ScorerProvider, MetricsTable, PolicyAverage, PolicyFoldResult};
pub use report::{emit_report, parse_report, ReportFormat, NO_KEY_POINTS};
