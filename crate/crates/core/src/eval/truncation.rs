use serde::{Deserialize, Serialize};

use super::cv::{run_cv, CvOptions, CvReport};
use crate::data::Dataset;
use crate::error::Result;
use crate::ingest::truncate_longest;
use crate::preprocess::PreprocessConfig;

/// Headline numbers of one run in a truncation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub sequences: usize,
    pub item_accuracy: f64,
    pub domain_accuracy: f64,
    pub max_sequence_length: usize,
    pub max_padded_length: usize,
    pub runtime_seconds: f64,
}

impl RunSummary {
    fn of(report: &CvReport, ds: &Dataset) -> Self {
        RunSummary {
            sequences: report.num_sequences,
            item_accuracy: report.mean_accuracy,
            domain_accuracy: report.mean_domain_accuracy,
            max_sequence_length: ds.max_len(),
            max_padded_length: report.max_padded_length,
            runtime_seconds: report.timing.total_seconds,
        }
    }
}

/// Cross-validation on all data next to cross-validation on the shortest
/// `keep_fraction` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub keep_fraction: f64,
    pub full: RunSummary,
    pub truncated: RunSummary,
    #[serde(skip)]
    pub full_report: Option<CvReport>,
    #[serde(skip)]
    pub truncated_report: Option<CvReport>,
}

impl TruncationComparison {
    /// Truncated minus full, for accuracy, padded length and runtime.
    pub fn deltas(&self) -> [(&'static str, f64, f64); 5] {
        let (f, t) = (&self.full, &self.truncated);
        [
            ("sequences", f.sequences as f64, t.sequences as f64),
            ("item accuracy", f.item_accuracy, t.item_accuracy),
            ("domain accuracy", f.domain_accuracy, t.domain_accuracy),
            ("max padded length", f.max_padded_length as f64, t.max_padded_length as f64),
            ("runtime (s)", f.runtime_seconds, t.runtime_seconds),
        ]
    }

    pub fn render_text(&self) -> String {
        let mut out = format!("{:<22}{:>12}{:>12}{:>12}\n", "", "full", "truncated", "delta");
        for (name, a, b) in self.deltas() {
            out.push_str(&format!("{name:<22}{a:>12.4}{b:>12.4}{:>12.4}\n", b - a));
        }
        out
    }
}

pub fn truncation_comparison(
    ds: &Dataset,
    cfg: &PreprocessConfig,
    opts: &CvOptions,
    keep_fraction: f64,
) -> Result<TruncationComparison> {
    let truncated = truncate_longest(ds, keep_fraction)?;
    let full_report = run_cv(ds, cfg, opts)?;
    let truncated_report = run_cv(&truncated, cfg, opts)?;
    Ok(TruncationComparison {
        keep_fraction,
        full: RunSummary::of(&full_report, ds),
        truncated: RunSummary::of(&truncated_report, &truncated),
        full_report: Some(full_report),
        truncated_report: Some(truncated_report),
    })
}
