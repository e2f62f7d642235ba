//! A fitted end-to-end model: preprocessing settings, the padding length
//! taken from the training batch, the MiniROCKET transform, the feature
//! standardizer and the ridge classifier.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::classifier::{default_lambda_grid, RidgeModel, Standardizer};
use crate::data::{ChannelSet, ItemLabel, SensorSequence};
use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::preprocess::{apply_config, Phase, PreprocessConfig, Prepared};
use crate::rocket::{RocketModel, DEFAULT_NUM_FEATURES};
use crate::seed::DEFAULT_SEED;

pub const ROCKET_FILE: &str = "rocket.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";
const CLASSIFIER_FORMAT: &str = "arat-classifier/1";

/// Everything needed to fit a pipeline apart from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub config: PreprocessConfig,
    pub channels: ChannelSet,
    pub num_features: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
}

impl Default for PipelineSpec {
    fn default() -> Self {
        PipelineSpec {
            config: PreprocessConfig::default(),
            channels: ChannelSet::All,
            num_features: DEFAULT_NUM_FEATURES,
            seed: DEFAULT_SEED,
            lambda_grid: default_lambda_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub config: PreprocessConfig,
    pub channels: ChannelSet,
    pub seed: u64,
    /// Padding length, fixed by the longest training sequence.
    pub target_len: usize,
    pub rocket: RocketModel,
    pub standardizer: Standardizer,
    pub ridge: RidgeModel,
}

/// On-disk companion of `rocket.json`.
#[derive(Debug, Serialize, Deserialize)]
struct ClassifierFile {
    format: String,
    rocket_sha256: String,
    config: PreprocessConfig,
    channels: ChannelSet,
    seed: u64,
    target_len: usize,
    standardizer: Standardizer,
    ridge: RidgeModel,
}

impl FittedPipeline {
    /// Fits on training sequences only.
    pub fn fit(train: &[SensorSequence], spec: &PipelineSpec) -> Result<Self> {
        let prepared = apply_config(train, &spec.config, Phase::Train, spec.channels.roles(), None, spec.seed)?;
        Self::fit_prepared(&prepared, spec)
    }

    pub fn fit_prepared(prepared: &Prepared, spec: &PipelineSpec) -> Result<Self> {
        let rocket = RocketModel::fit(&prepared.tensor, spec.num_features, spec.seed)?;
        let features = rocket.transform(&prepared.tensor)?;
        let standardizer = Standardizer::fit(features.view())?;
        let z = standardizer.apply(features.view())?;
        let ridge = RidgeModel::fit(z.view(), &prepared.labels, &spec.lambda_grid)?;
        Ok(FittedPipeline {
            config: spec.config,
            channels: spec.channels,
            seed: spec.seed,
            target_len: prepared.target_len,
            rocket,
            standardizer,
            ridge,
        })
    }

    /// Evaluation-phase preprocessing: no noise, padded or cut to the training length.
    pub fn prepare(&self, seqs: &[SensorSequence]) -> Result<Prepared> {
        apply_config(
            seqs,
            &self.config,
            Phase::Eval,
            self.channels.roles(),
            Some(self.target_len),
            self.seed,
        )
    }

    pub fn features(&self, tensor: &Array3<f64>) -> Result<Array2<f64>> {
        self.rocket.transform(tensor)
    }

    pub fn predict_tensor(&self, tensor: &Array3<f64>) -> Result<Vec<ItemLabel>> {
        let features = self.rocket.transform(tensor)?;
        crate::classifier::predict(&self.ridge, &self.standardizer, features.view())
    }

    pub fn predict(&self, seqs: &[SensorSequence]) -> Result<Vec<ItemLabel>> {
        self.predict_tensor(&self.prepare(seqs)?.tensor)
    }

    /// Writes `rocket.json` and `classifier.json` into `dir`. The classifier
    /// file records the SHA-256 of the transform it was trained against.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let rocket_json = self.rocket.to_json()?;
        let file = ClassifierFile {
            format: CLASSIFIER_FORMAT.into(),
            rocket_sha256: self.rocket.digest()?,
            config: self.config,
            channels: self.channels,
            seed: self.seed,
            target_len: self.target_len,
            standardizer: self.standardizer.clone(),
            ridge: self.ridge.clone(),
        };
        write_atomic(&dir.join(ROCKET_FILE), rocket_json.as_bytes())?;
        write_atomic(&dir.join(CLASSIFIER_FILE), serde_json::to_string(&file)?.as_bytes())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let rocket = RocketModel::load(&dir.join(ROCKET_FILE))?;
        let path = dir.join(CLASSIFIER_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: ClassifierFile = serde_json::from_str(&text)?;
        if file.format != CLASSIFIER_FORMAT {
            return Err(Error::Serde(format!("unsupported classifier format `{}`", file.format)));
        }
        if file.rocket_sha256 != rocket.digest()? {
            return Err(Error::Serde(format!(
                "{} does not match the transform it was trained with",
                path.display()
            )));
        }
        let features = rocket.num_features;
        if file.standardizer.mean.len() != features
            || file.standardizer.std.len() != features
            || file.ridge.weights.nrows() != features
            || file.ridge.intercepts.len() != file.ridge.class_order.len()
            || file.ridge.weights.ncols() != file.ridge.class_order.len()
        {
            return Err(Error::Serde("classifier dimensions do not match the transform".into()));
        }
        if file.target_len != rocket.fitted_length || file.channels.len() != rocket.num_channels {
            return Err(Error::Serde("classifier header does not match the transform".into()));
        }
        Ok(FittedPipeline {
            config: file.config,
            channels: file.channels,
            seed: file.seed,
            target_len: file.target_len,
            rocket,
            standardizer: file.standardizer,
            ridge: file.ridge,
        })
    }
}
