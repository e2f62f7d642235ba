//! Recognition of ARAT test items from wrist-worn IMU recordings.
//!
//! The pipeline loads labelled sensor sequences, applies a configurable
//! preprocessing chain (orientation freeing, low-pass filtering, noise
//! augmentation, padding), extracts MiniROCKET features and classifies them
//! with a ridge model chosen by leave-one-out error. Cross-validation and
//! preprocessing grid search sit on top.

pub mod classifier;
pub mod data;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod rocket;
pub mod seed;
pub mod synth;

pub use classifier::{RidgeModel, Standardizer};
pub use data::{
    ChannelRole, ChannelSet, Dataset, Domain, ItemLabel, LabelTaxonomy, SensorSequence, Side, ValidationReport,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{ConfusionMatrix, CvOptions, CvReport, FoldPlan};
pub use pipeline::{FittedPipeline, PipelineSpec};
pub use preprocess::{PaddingMode, Phase, PreprocessConfig};
pub use rocket::RocketModel;
pub use synth::SynthSpec;
