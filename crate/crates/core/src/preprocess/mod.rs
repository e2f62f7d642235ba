//! Signal preprocessing: orientation freeing, low-pass filtering, noise
//! augmentation and padding into a dense `[N × C × L]` tensor.
//!
//! Per sequence, stages run in a fixed order: freeing, filtering, noise
//! (training phase only), then padding to the target length. Sequences
//! longer than the target are cut at the target.

mod config;
pub mod filter;
pub mod orientation;

use ndarray::{s, Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

pub use config::{
    enumerate_grid, parse_config_list, FilterSweep, PaddingMode, PreprocessConfig, CONFIG_KEYS,
    CUTOFFS_HZ, NOISE_LEVELS_ACC, NOISE_LEVELS_GYR,
};
pub use filter::{butterworth_lowpass, ButterworthLowpass};
pub use orientation::{free_acceleration, free_angular_velocity, free_sequence, GRAVITY};

use crate::data::{ChannelRole, ItemLabel, SensorSequence};
use crate::error::{Error, Result};
use crate::ingest::select_sequence_channels;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Extends `seq` at the tail to `target_len` samples.
pub fn pad_to_length(seq: &SensorSequence, target_len: usize, mode: PaddingMode) -> Result<SensorSequence> {
    let len = seq.len();
    if target_len < len {
        return Err(Error::InvalidParameter(format!(
            "cannot pad sequence `{}` of length {len} to {target_len}",
            seq.id
        )));
    }
    let mut samples = Array2::zeros((seq.num_channels(), target_len));
    samples.slice_mut(s![.., ..len]).assign(&seq.samples);
    if mode == PaddingMode::Mean && target_len > len {
        for (c, row) in seq.samples.rows().into_iter().enumerate() {
            let mean = row.sum() / len as f64;
            samples.slice_mut(s![c, len..]).fill(mean);
        }
    }
    Ok(SensorSequence {
        samples,
        ..seq.clone()
    })
}

/// Adds zero-mean Gaussian noise to the acceleration and angular-velocity
/// channels. Quaternion channels are never touched.
pub fn inject_noise<R: Rng + ?Sized>(
    seq: &SensorSequence,
    std_acc: f64,
    std_gyr: f64,
    rng: &mut R,
) -> Result<SensorSequence> {
    if !(std_acc >= 0.0 && std_gyr >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise standard deviations must be non-negative, got {std_acc} / {std_gyr}"
        )));
    }
    let mut out = seq.clone();
    for (c, role) in seq.channels.iter().enumerate() {
        let std = if role.is_acc() {
            std_acc
        } else if role.is_gyr() {
            std_gyr
        } else {
            continue;
        };
        if std == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in out.samples.row_mut(c).iter_mut() {
            *v += normal.sample(rng);
        }
    }
    Ok(out)
}

/// Freeing, filtering and (train phase) noise for one sequence. The noise
/// stream is derived from `(seed, sequence id)`, so results do not depend on
/// processing order.
pub fn preprocess_sequence(
    seq: &SensorSequence,
    cfg: &PreprocessConfig,
    phase: Phase,
    seed: u64,
) -> Result<SensorSequence> {
    let mut out = free_sequence(seq, cfg.free_acceleration, cfg.free_angular_velocity)?;
    if let Some(cutoff) = cfg.filter_acc_hz {
        out = butterworth_lowpass(&out, cutoff, &ChannelRole::ACC)?;
    }
    if let Some(cutoff) = cfg.filter_gyr_hz {
        out = butterworth_lowpass(&out, cutoff, &ChannelRole::GYR)?;
    }
    if phase == Phase::Train && cfg.noise_enabled() {
        let mut rng = seed::derived_rng(seed, &format!("noise/{}", seq.id));
        out = inject_noise(
            &out,
            cfg.noise_std_acc.unwrap_or(0.0),
            cfg.noise_std_gyr.unwrap_or(0.0),
            &mut rng,
        )?;
    }
    Ok(out)
}

/// Dense model input built from a batch of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    /// `[N × C × L]`
    pub tensor: Array3<f64>,
    pub ids: Vec<String>,
    pub labels: Vec<ItemLabel>,
    pub channels: Vec<ChannelRole>,
    pub target_len: usize,
}

/// Runs the full preprocessing chain over `seqs` and stacks the result.
///
/// `channels` picks the model input channels after freeing (which needs the
/// quaternions). `target_len` of `None` pads to the batch maximum, which is
/// how training batches are built; evaluation batches pass the training length.
pub fn apply_config(
    seqs: &[SensorSequence],
    cfg: &PreprocessConfig,
    phase: Phase,
    channels: &[ChannelRole],
    target_len: Option<usize>,
    seed: u64,
) -> Result<Prepared> {
    if seqs.is_empty() {
        return Err(Error::InvalidDataset("nothing to preprocess".into()));
    }
    cfg.validate(seqs[0].sample_rate)?;
    let processed = seqs
        .par_iter()
        .map(|s| {
            let p = preprocess_sequence(s, cfg, phase, seed)?;
            select_sequence_channels(&p, channels)
        })
        .collect::<Result<Vec<_>>>()?;
    let target = target_len.unwrap_or_else(|| processed.iter().map(SensorSequence::len).max().unwrap_or(0));
    if target == 0 {
        return Err(Error::InvalidParameter("target length must be positive".into()));
    }
    let mut tensor = Array3::zeros((processed.len(), channels.len(), target));
    for (i, p) in processed.iter().enumerate() {
        let view = if p.len() > target {
            p.samples.slice(s![.., ..target]).to_owned()
        } else {
            pad_to_length(p, target, cfg.padding)?.samples
        };
        tensor.slice_mut(s![i, .., ..]).assign(&view);
    }
    Ok(Prepared {
        tensor,
        ids: seqs.iter().map(|s| s.id.clone()).collect(),
        labels: seqs.iter().map(|s| s.label.clone()).collect(),
        channels: channels.to_vec(),
        target_len: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Side;
    use ndarray::array;

    fn seq(id: &str, len: usize) -> SensorSequence {
        let mut samples = Array2::zeros((10, len));
        for t in 0..len {
            for c in 0..6 {
                samples[[c, t]] = (c as f64 + 1.0) * (t as f64 * 0.3).sin();
            }
            samples[[2, t]] += GRAVITY;
            samples[[6, t]] = 1.0;
        }
        SensorSequence {
            id: id.into(),
            samples,
            sample_rate: 60.0,
            channels: ChannelRole::ALL.to_vec(),
            label: ItemLabel::new("stone"),
            subject_id: "P".into(),
            side: Side::Left,
            score: Some(1),
        }
    }

    fn one_channel(values: &[f64]) -> SensorSequence {
        SensorSequence {
            samples: Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap(),
            channels: vec![ChannelRole::AccX],
            ..seq("x", 9)
        }
    }

    #[test]
    fn padding_examples() {
        let s = one_channel(&[1.0, 2.0, 3.0]);
        assert_eq!(pad_to_length(&s, 3, PaddingMode::Zero).unwrap(), s);
        let z = pad_to_length(&s, 5, PaddingMode::Zero).unwrap();
        assert_eq!(z.samples, array![[1.0, 2.0, 3.0, 0.0, 0.0]]);
        let m = pad_to_length(&s, 5, PaddingMode::Mean).unwrap();
        assert_eq!(m.samples, array![[1.0, 2.0, 3.0, 2.0, 2.0]]);
        assert!(pad_to_length(&s, 2, PaddingMode::Zero).is_err());
    }

    #[test]
    fn zero_noise_is_identity_and_quaternions_are_untouched() {
        let s = seq("a", 50);
        let mut rng = seed::rng(1);
        assert_eq!(inject_noise(&s, 0.0, 0.0, &mut rng).unwrap(), s);
        let noisy = inject_noise(&s, 0.5, 3.0, &mut rng).unwrap();
        for c in 6..10 {
            assert_eq!(noisy.samples.row(c), s.samples.row(c));
        }
        assert_ne!(noisy.samples.row(0), s.samples.row(0));
        assert!(inject_noise(&s, -1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn all_off_config_is_plain_zero_padding() {
        let seqs = vec![seq("a", 20), seq("b", 12)];
        let p = apply_config(&seqs, &PreprocessConfig::default(), Phase::Train, &ChannelRole::ALL, None, 42).unwrap();
        assert_eq!(p.tensor.dim(), (2, 10, 20));
        assert_eq!(p.tensor.slice(s![0, .., ..]), seqs[0].samples);
        assert_eq!(p.tensor.slice(s![1, .., ..12]), seqs[1].samples);
        assert!(p.tensor.slice(s![1, .., 12..]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eval_phase_skips_noise_and_truncates() {
        let seqs = vec![seq("a", 30)];
        let cfg = PreprocessConfig::best_reported();
        let p = apply_config(&seqs, &cfg, Phase::Eval, &ChannelRole::ALL, Some(25), 42).unwrap();
        assert_eq!(p.tensor.slice(s![0, .., ..]), seqs[0].samples.slice(s![.., ..25]));
        let t = apply_config(&seqs, &cfg, Phase::Train, &ChannelRole::ALL, None, 42).unwrap();
        assert_ne!(t.tensor.slice(s![0, .., ..25]), seqs[0].samples.slice(s![.., ..25]));
    }

    #[test]
    fn apply_config_is_deterministic_and_order_independent() {
        let seqs = vec![seq("a", 30), seq("b", 25), seq("c", 40)];
        let cfg = PreprocessConfig::best_reported();
        let p1 = apply_config(&seqs, &cfg, Phase::Train, &ChannelRole::ALL, None, 42).unwrap();
        let p2 = apply_config(&seqs, &cfg, Phase::Train, &ChannelRole::ALL, None, 42).unwrap();
        assert_eq!(p1, p2);
        let reversed: Vec<_> = seqs.iter().rev().cloned().collect();
        let p3 = apply_config(&reversed, &cfg, Phase::Train, &ChannelRole::ALL, None, 42).unwrap();
        assert_eq!(p1.tensor.slice(s![0, .., ..]), p3.tensor.slice(s![2, .., ..]));
    }

    #[test]
    fn freeing_needs_quaternions_before_channel_selection() {
        let seqs = vec![seq("a", 30)];
        let cfg = PreprocessConfig {
            free_acceleration: true,
            free_angular_velocity: true,
            ..Default::default()
        };
        let p = apply_config(&seqs, &cfg, Phase::Eval, &ChannelRole::ALL[..6], None, 1).unwrap();
        assert_eq!(p.tensor.dim(), (1, 6, 30));
        // Identity orientation: acc_z loses exactly gravity.
        for t in 0..30 {
            let expected = seqs[0].samples[[2, t]] - GRAVITY;
            assert!((p.tensor[[0, 2, t]] - expected).abs() < 1e-9);
        }
        let no_quat = select_sequence_channels(&seqs[0], &ChannelRole::ALL[..6]).unwrap();
        assert!(apply_config(&[no_quat], &cfg, Phase::Eval, &ChannelRole::ALL[..6], None, 1).is_err());
    }

    #[test]
    fn filtering_touches_only_its_group() {
        let seqs = [seq("a", 120)];
        let cfg = PreprocessConfig {
            filter_acc_hz: Some(10.0),
            ..Default::default()
        };
        let out = preprocess_sequence(&seqs[0], &cfg, Phase::Eval, 0).unwrap();
        assert_ne!(out.samples.row(0), seqs[0].samples.row(0));
        for c in 3..10 {
            assert_eq!(out.samples.row(c), seqs[0].samples.row(c));
        }
    }
}
