use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::confusion::{aggregate_domains, confusion, ConfusionMatrix};
use super::folds::{make_folds, make_stratified_folds, FoldPlan};
use crate::classifier::default_lambda_grid;
use crate::data::{ChannelSet, Dataset, ItemLabel, SensorSequence};
use crate::error::{Error, Result};
use crate::pipeline::{FittedPipeline, PipelineSpec};
use crate::preprocess::PreprocessConfig;
use crate::rocket::DEFAULT_NUM_FEATURES;
use crate::seed::DEFAULT_SEED;

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub num_features: usize,
    pub channels: ChannelSet,
    /// Deal folds per label instead of splitting one shuffled list.
    pub stratified: bool,
    pub lambda_grid: Vec<f64>,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: DEFAULT_FOLDS,
            seed: DEFAULT_SEED,
            num_features: DEFAULT_NUM_FEATURES,
            channels: ChannelSet::All,
            stratified: false,
            lambda_grid: default_lambda_grid(),
        }
    }
}

impl CvOptions {
    pub fn pipeline_spec(&self, config: &PreprocessConfig) -> PipelineSpec {
        PipelineSpec {
            config: *config,
            channels: self.channels,
            num_features: self.num_features,
            seed: self.seed,
            lambda_grid: self.lambda_grid.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub eval_size: usize,
    pub accuracy: f64,
    pub domain_accuracy: f64,
    pub lambda: f64,
    pub padded_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub fold: usize,
    pub truth: ItemLabel,
    pub predicted: ItemLabel,
}

/// Wall-clock measurements, kept apart from the reproducible fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub fold_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: PreprocessConfig,
    pub channels: ChannelSet,
    pub k: usize,
    pub seed: u64,
    pub num_features: usize,
    pub num_sequences: usize,
    /// Longest training padding length over all folds.
    pub max_padded_length: usize,
    pub folds: Vec<FoldResult>,
    /// Unweighted mean of the per-fold accuracies.
    pub mean_accuracy: f64,
    pub mean_domain_accuracy: f64,
    pub item_confusion: ConfusionMatrix,
    pub domain_confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
    pub timing: Timing,
}

impl CvReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the timing block zeroed, for reproducibility checks.
    pub fn to_json_without_timing(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timing = Timing::default();
        copy.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fold_plan(ds: &Dataset, opts: &CvOptions) -> Result<FoldPlan> {
    let ids: Vec<String> = ds.sequences().iter().map(|s| s.id.clone()).collect();
    if opts.stratified {
        let labels: Vec<ItemLabel> = ds.sequences().iter().map(|s| s.label.clone()).collect();
        make_stratified_folds(&ids, &labels, opts.k, opts.seed)
    } else {
        make_folds(&ids, opts.k, opts.seed)
    }
}

/// Splits `ds` into (train, eval) index lists for every fold, refusing folds
/// whose training part lacks a class.
fn fold_indices(ds: &Dataset, plan: &FoldPlan) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let assignments = plan.assignments();
    let all_labels: BTreeSet<&ItemLabel> = ds.sequences().iter().map(|s| &s.label).collect();
    (0..plan.k)
        .map(|f| {
            let (eval, train): (Vec<usize>, Vec<usize>) =
                (0..ds.len()).partition(|&i| assignments[&ds.sequences()[i].id] == f);
            let present: BTreeSet<&ItemLabel> = train.iter().map(|&i| &ds.sequences()[i].label).collect();
            let missing: Vec<String> = all_labels.difference(&present).map(|l| l.to_string()).collect();
            if !missing.is_empty() {
                return Err(Error::FoldMissingClass { fold: f, missing });
            }
            Ok((train, eval))
        })
        .collect()
}

struct FoldOutcome {
    pipeline: FittedPipeline,
    eval_ids: Vec<String>,
    truth: Vec<ItemLabel>,
    predicted: Vec<ItemLabel>,
    seconds: f64,
}

fn gather(ds: &Dataset, idx: &[usize]) -> Vec<SensorSequence> {
    idx.iter().map(|&i| ds.sequences()[i].clone()).collect()
}

/// k-fold cross-validation that also returns every fold's fitted pipeline.
pub fn run_cv_with_models(ds: &Dataset, cfg: &PreprocessConfig, opts: &CvOptions) -> Result<(CvReport, Vec<FittedPipeline>)> {
    let started = Instant::now();
    let order = ds.present_labels();
    if order.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "cross-validation needs at least two classes, found {}",
            order.len()
        )));
    }
    let plan = fold_plan(ds, opts)?;
    let splits = fold_indices(ds, &plan)?;
    let spec = opts.pipeline_spec(cfg);

    let outcomes: Vec<FoldOutcome> = splits
        .par_iter()
        .map(|(train_idx, eval_idx)| {
            let t0 = Instant::now();
            let train = gather(ds, train_idx);
            let eval = gather(ds, eval_idx);
            let pipeline = FittedPipeline::fit(&train, &spec)?;
            let predicted = pipeline.predict(&eval)?;
            Ok(FoldOutcome {
                pipeline,
                eval_ids: eval.iter().map(|s| s.id.clone()).collect(),
                truth: eval.iter().map(|s| s.label.clone()).collect(),
                predicted,
                seconds: t0.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<_>>()?;

    let mut item_confusion = ConfusionMatrix::zeros(order.iter().map(|l| l.to_string()).collect());
    let mut domain_confusion = aggregate_domains(&item_confusion, ds.taxonomy())?;
    let mut folds = Vec::with_capacity(outcomes.len());
    let mut predictions = Vec::with_capacity(ds.len());
    for (f, (o, (train_idx, _))) in outcomes.iter().zip(&splits).enumerate() {
        let cm = confusion(&o.truth, &o.predicted, &order)?;
        let dcm = aggregate_domains(&cm, ds.taxonomy())?;
        item_confusion.add(&cm)?;
        domain_confusion.add(&dcm)?;
        folds.push(FoldResult {
            fold: f,
            train_size: train_idx.len(),
            eval_size: o.truth.len(),
            accuracy: cm.accuracy(),
            domain_accuracy: dcm.accuracy(),
            lambda: o.pipeline.ridge.lambda,
            padded_length: o.pipeline.target_len,
        });
        for ((id, t), p) in o.eval_ids.iter().zip(&o.truth).zip(&o.predicted) {
            predictions.push(Prediction {
                id: id.clone(),
                fold: f,
                truth: t.clone(),
                predicted: p.clone(),
            });
        }
    }
    let k = folds.len() as f64;
    let report = CvReport {
        config: *cfg,
        channels: opts.channels,
        k: opts.k,
        seed: opts.seed,
        num_features: opts.num_features,
        num_sequences: ds.len(),
        max_padded_length: folds.iter().map(|f| f.padded_length).max().unwrap_or(0),
        mean_accuracy: folds.iter().map(|f| f.accuracy).sum::<f64>() / k,
        mean_domain_accuracy: folds.iter().map(|f| f.domain_accuracy).sum::<f64>() / k,
        folds,
        item_confusion,
        domain_confusion,
        predictions,
        timing: Timing {
            total_seconds: started.elapsed().as_secs_f64(),
            fold_seconds: outcomes.iter().map(|o| o.seconds).collect(),
        },
    };
    Ok((report, outcomes.into_iter().map(|o| o.pipeline).collect()))
}

/// k-fold cross-validation: every fold's model sees only its training folds.
pub fn run_cv(ds: &Dataset, cfg: &PreprocessConfig, opts: &CvOptions) -> Result<CvReport> {
    run_cv_with_models(ds, cfg, opts).map(|(r, _)| r)
}
