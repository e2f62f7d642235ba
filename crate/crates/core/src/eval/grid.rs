use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::cv::{run_cv, CvOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{PaddingMode, PreprocessConfig};

/// Column layout of the ranked table.
pub const GRID_HEADER: [&str; 10] = [
    "rank",
    "Std. noise acceleration",
    "Std. noise ang. vel.",
    "Padding",
    "Filter frequency acceleration / ang. vel.",
    "Freed sensors",
    "Mean accuracy",
    "Mean domain accuracy",
    "runtime_s",
    "status",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// 1-based position after ranking.
    pub rank: usize,
    /// Position in the submitted config list.
    pub config_index: usize,
    pub config: PreprocessConfig,
    pub mean_accuracy: Option<f64>,
    pub mean_domain_accuracy: Option<f64>,
    pub runtime_seconds: f64,
    /// Set when the config failed; the sweep carries on.
    pub error: Option<String>,
}

/// Cross-validates each config and ranks by mean accuracy, best first.
/// Equal accuracies keep submission order; failed configs go last.
pub fn grid_search(ds: &Dataset, configs: &[PreprocessConfig], opts: &CvOptions) -> Result<Vec<GridRow>> {
    if configs.is_empty() {
        return Err(Error::InvalidParameter("grid search needs at least one config".into()));
    }
    let mut rows: Vec<GridRow> = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let t0 = Instant::now();
            let outcome = run_cv(ds, cfg, opts);
            let runtime_seconds = t0.elapsed().as_secs_f64();
            match outcome {
                Ok(r) => GridRow {
                    rank: 0,
                    config_index: i,
                    config: *cfg,
                    mean_accuracy: Some(r.mean_accuracy),
                    mean_domain_accuracy: Some(r.mean_domain_accuracy),
                    runtime_seconds,
                    error: None,
                },
                Err(e) => GridRow {
                    rank: 0,
                    config_index: i,
                    config: *cfg,
                    mean_accuracy: None,
                    mean_domain_accuracy: None,
                    runtime_seconds,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rank_rows(&mut rows);
    Ok(rows)
}

pub(crate) fn rank_rows(rows: &mut [GridRow]) {
    rows.sort_by(|a, b| {
        let key = |r: &GridRow| r.mean_accuracy.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then(a.config_index.cmp(&b.config_index))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

fn fmt_std(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "0".into())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}%", 100.0 * x)).unwrap_or_default()
}

/// Ranked table as CSV.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GRID_HEADER).expect("in-memory write");
    for r in rows {
        let padding = match r.config.padding {
            PaddingMode::Mean => "Mean",
            PaddingMode::Zero => "Zero",
        };
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("failed: {e}"),
        };
        w.write_record([
            r.rank.to_string(),
            fmt_std(r.config.noise_std_acc),
            fmt_std(r.config.noise_std_gyr),
            padding.to_string(),
            r.config.filter_pair_label(),
            r.config.freed_label().to_string(),
            fmt_pct(r.mean_accuracy),
            fmt_pct(r.mean_domain_accuracy),
            format!("{:.3}", r.runtime_seconds),
            status,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}
