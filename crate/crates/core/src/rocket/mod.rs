//! MiniROCKET: a fixed bank of 84 length-9 kernels applied at a ladder of
//! dilations, each (kernel, dilation) pair pooled into proportion-of-positive
//! values against biases fitted from training convolution outputs.
//!
//! Feature layout: pairs in dilation-major, kernel-minor order; each pair
//! contributes `features_per_dilation[dilation]` consecutive features, one per
//! bias.

mod conv;
mod dilation;
mod kernels;

use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use conv::{dilated_convolve, ppv, quantile};
pub use dilation::{plan_dilations, DilationPlan, BIAS_QUANTILES, MAX_DILATIONS_PER_KERNEL};
pub use kernels::{enumerate_kernels, KernelPattern, KERNEL_LEN, NUM_KERNELS, NUM_POSITIVE};

use crate::error::{Error, Result};
use crate::seed;

/// Largest multiple of 84 × 3 not above 10 000.
pub const DEFAULT_NUM_FEATURES: usize = 9_828;

/// Largest channel subset a single pair may combine.
pub const MAX_CHANNELS_PER_PAIR: usize = 9;

const FORMAT_TAG: &str = "arat-rocket/1";

/// Draws a channel subset for every pair of `plan`. Subset sizes are uniform
/// over `1..=min(num_channels, 9)`; members are sampled without replacement
/// and stored ascending.
pub fn assign_channels<R: Rng + ?Sized>(num_channels: usize, plan: &DilationPlan, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if num_channels == 0 {
        return Err(Error::InvalidParameter("at least one channel is required".into()));
    }
    let max = num_channels.min(MAX_CHANNELS_PER_PAIR);
    Ok((0..plan.num_pairs())
        .map(|_| {
            let size = rng.random_range(1..=max);
            let mut subset = sample(rng, num_channels, size).into_vec();
            subset.sort_unstable();
            subset
        })
        .collect())
}

/// Multichannel convolution output for one pair: per-channel padded
/// convolutions summed in ascending channel order, then cut to the valid
/// region when the pair is unpadded.
fn pair_output<'a>(
    x: ArrayView2<'_, f64>,
    channels: &[usize],
    weights: &[f64; KERNEL_LEN],
    dilation: usize,
    padded: bool,
    scratch: &mut [f64],
    out: &'a mut [f64],
) -> &'a [f64] {
    out.fill(0.0);
    for &c in channels {
        let row = x.row(c);
        let series = row.as_slice().expect("standard layout");
        conv::convolve_padded_into(series, weights, dilation, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o += s;
        }
    }
    if padded {
        out
    } else {
        let range = conv::valid_range(out.len(), dilation).expect("plan respects the span limit");
        &out[range]
    }
}

/// Fits one bias per feature. Each pair draws a training example uniformly,
/// computes its multichannel output and fills its budget by cycling through
/// the 0.25, 0.5 and 0.75 quantiles of that output.
pub fn fit_biases<R: Rng + ?Sized>(
    train: &Array3<f64>,
    kernels: &[KernelPattern],
    plan: &DilationPlan,
    assignments: &[Vec<usize>],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n, _, len) = train.dim();
    if n == 0 {
        return Err(Error::InvalidDataset("cannot fit biases on an empty training set".into()));
    }
    if len != plan.input_length {
        return Err(Error::Shape(format!(
            "training length {len} does not match the planned length {}",
            plan.input_length
        )));
    }
    let train = train.as_standard_layout();
    let examples: Vec<usize> = (0..plan.num_pairs()).map(|_| rng.random_range(0..n)).collect();

    let per_pair: Vec<Vec<f64>> = (0..plan.num_pairs())
        .into_par_iter()
        .map_init(
            || (vec![0.0; len], vec![0.0; len]),
            |(scratch, out), p| {
                let di = p / NUM_KERNELS;
                let k = p % NUM_KERNELS;
                let x = train.index_axis(Axis(0), examples[p]);
                let output = pair_output(
                    x,
                    &assignments[p],
                    &kernels[k].weights_f64(),
                    plan.dilations[di],
                    plan.padding[p],
                    scratch,
                    out,
                );
                let mut sorted = output.to_vec();
                sorted.sort_by(f64::total_cmp);
                (0..plan.features_per_dilation[di])
                    .map(|f| conv::quantile_sorted(&sorted, BIAS_QUANTILES[f % BIAS_QUANTILES.len()]))
                    .collect()
            },
        )
        .collect();
    Ok(per_pair.into_iter().flatten().collect())
}

/// A fitted transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocketModel {
    format: String,
    pub seed: u64,
    pub num_features: usize,
    pub num_channels: usize,
    pub fitted_length: usize,
    pub kernels: Vec<KernelPattern>,
    pub plan: DilationPlan,
    /// Channel subset per pair.
    pub channel_assignments: Vec<Vec<usize>>,
    /// One bias per feature.
    pub biases: Vec<f64>,
}

impl RocketModel {
    /// Fits kernels, dilations, channel subsets and biases to a `[N × C × L]`
    /// training tensor. Deterministic in `(train, num_features, seed)`.
    pub fn fit(train: &Array3<f64>, num_features: usize, seed: u64) -> Result<Self> {
        let (n, channels, len) = train.dim();
        if n == 0 || channels == 0 {
            return Err(Error::InvalidDataset("cannot fit on an empty tensor".into()));
        }
        let kernels = enumerate_kernels();
        let plan = plan_dilations(len, num_features)?;
        let channel_assignments = assign_channels(channels, &plan, &mut seed::derived_rng(seed, "rocket/channels"))?;
        let biases = fit_biases(
            train,
            &kernels,
            &plan,
            &channel_assignments,
            &mut seed::derived_rng(seed, "rocket/biases"),
        )?;
        Ok(RocketModel {
            format: FORMAT_TAG.into(),
            seed,
            num_features,
            num_channels: channels,
            fitted_length: len,
            kernels,
            plan,
            channel_assignments,
            biases,
        })
    }

    /// Indices of features pooled from unpadded convolutions.
    pub fn unpadded_features(&self) -> Vec<usize> {
        let offsets = self.plan.feature_offsets();
        (0..self.plan.num_pairs())
            .filter(|&p| !self.plan.padding[p])
            .flat_map(|p| offsets[p]..offsets[p + 1])
            .collect()
    }

    fn check_input(&self, channels: usize, len: usize) -> Result<()> {
        if channels != self.num_channels || len != self.fitted_length {
            return Err(Error::Shape(format!(
                "input is {channels} channels × {len} samples, model expects {} × {}",
                self.num_channels, self.fitted_length
            )));
        }
        Ok(())
    }

    /// Features of a single `[C × L]` series.
    pub fn transform_one(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check_input(x.nrows(), x.ncols())?;
        let x = x.as_standard_layout();
        let mut features = vec![0.0; self.num_features];
        let mut scratch = vec![0.0; self.fitted_length];
        let mut out = vec![0.0; self.fitted_length];
        self.fill_features(x.view(), &mut features, &mut scratch, &mut out);
        Ok(features)
    }

    fn fill_features(&self, x: ArrayView2<'_, f64>, features: &mut [f64], scratch: &mut [f64], out: &mut [f64]) {
        let mut f = 0;
        for (di, &dilation) in self.plan.dilations.iter().enumerate() {
            let count = self.plan.features_per_dilation[di];
            for (k, kernel) in self.kernels.iter().enumerate() {
                let p = self.plan.pair_index(di, k);
                let output = pair_output(
                    x,
                    &self.channel_assignments[p],
                    &kernel.weights_f64(),
                    dilation,
                    self.plan.padding[p],
                    scratch,
                    out,
                );
                for slot in 0..count {
                    features[f + slot] = conv::ppv_unchecked(output, self.biases[f + slot]);
                }
                f += count;
            }
        }
    }

    /// Features of every series in a `[N × C × L]` tensor, as `[N × F]`.
    /// Rows are computed independently, so batching never changes the result.
    pub fn transform(&self, tensor: &Array3<f64>) -> Result<Array2<f64>> {
        let (n, channels, len) = tensor.dim();
        self.check_input(channels, len)?;
        let tensor = tensor.as_standard_layout();
        let mut flat = vec![0.0; n * self.num_features];
        flat.par_chunks_mut(self.num_features.max(1)).enumerate().for_each_init(
            || (vec![0.0; len], vec![0.0; len]),
            |(scratch, out), (i, features)| {
                self.fill_features(tensor.index_axis(Axis(0), i), features, scratch, out);
            },
        );
        let result = Array2::from_shape_vec((n, self.num_features), flat).expect("sized above");
        Ok(result)
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::Serde(format!("unsupported model format `{}`", self.format)));
        }
        self.plan.check()?;
        if self.plan.input_length != self.fitted_length || self.plan.num_features() != self.num_features {
            return Err(Error::Serde("plan does not match the model header".into()));
        }
        if self.kernels.len() != NUM_KERNELS || self.kernels.iter().any(|k| !k.is_valid()) {
            return Err(Error::Serde("kernel bank is malformed".into()));
        }
        if self.biases.len() != self.num_features {
            return Err(Error::Serde(format!(
                "{} biases for {} features",
                self.biases.len(),
                self.num_features
            )));
        }
        if self.channel_assignments.len() != self.plan.num_pairs()
            || self
                .channel_assignments
                .iter()
                .any(|s| s.is_empty() || s.iter().any(|&c| c >= self.num_channels))
        {
            return Err(Error::Serde("channel assignments are malformed".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: RocketModel = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the serialized model.
    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}
