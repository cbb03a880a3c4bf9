use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::analysis::{AnalysisResult, UnitResult};
use crate::error::{Error, Result};

/// Marker printed in place of an empty key point table.
pub const NO_KEY_POINTS: &str = "no key points extracted";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    /// Pretty JSON of the whole [`AnalysisResult`].
    #[default]
    Structured,
    /// Per key point rows with whole percentages and the top two comments.
    HumanTable,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" | "json" => Ok(ReportFormat::Structured),
            "table" | "human-table" => Ok(ReportFormat::HumanTable),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

pub fn emit_report(result: &AnalysisResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(result).expect("analysis results serialize");
            s.push('\n');
            s
        }
        ReportFormat::HumanTable => human_table(result),
    }
}

pub fn parse_report(text: &str) -> Result<AnalysisResult> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

fn percent(fraction: f64) -> i64 {
    (fraction * 100.0).round() as i64
}

fn unit_header(unit: &UnitResult) -> String {
    match unit.stance {
        Some(stance) => format!("{} ({stance})", unit.topic),
        None => unit.topic.clone(),
    }
}

fn human_table(result: &AnalysisResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset: {}", result.dataset);
    if result.key_point_count() == 0 {
        let _ = writeln!(out, "{NO_KEY_POINTS}");
    }
    for unit in &result.units {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "== {} | comments: {} | candidates: {} | coverage: {}%",
            unit_header(unit),
            unit.comment_count,
            unit.candidate_count,
            percent(unit.coverage)
        );
        if unit.key_points.is_empty() {
            let _ = writeln!(out, "   {NO_KEY_POINTS}");
        }
        for (rank, kp) in unit.key_points.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>2}. {:>3}%  ({})  {}",
                rank + 1,
                percent(kp.prevalence),
                kp.matched.len(),
                kp.key_point.text
            );
            for m in kp.matched.iter().take(2) {
                let _ = writeln!(out, "          - [{:.3}] {}", m.score, m.text);
            }
        }
        if !unit.unmatched.is_empty() {
            let _ = writeln!(out, "   unmatched: {}", unit.unmatched.len());
        }
    }
    out
}
