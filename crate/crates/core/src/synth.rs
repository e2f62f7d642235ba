//! Synthetic labelled recordings with controllable separability.
//!
//! Class `c` oscillates at its own frequency under one of three envelopes
//! (Hann, rising ramp, falling ramp). The sensor rotates about a
//! class-specific axis by an angle following the same oscillation, so the
//! quaternion, angular-velocity and acceleration channels are mutually
//! consistent: acceleration is the world-frame oscillation plus gravity
//! along world z, expressed in the sensor frame.

use std::f64::consts::PI;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    ChannelRole, ChannelSet, Dataset, ItemLabel, LabelTaxonomy, SensorSequence, Side, DEFAULT_SAMPLE_RATE_HZ,
    MIN_SEQUENCE_LEN,
};
use crate::error::{Error, Result};
use crate::ingest::select_channels;
use crate::preprocess::GRAVITY;
use crate::seed;

/// Frequency of class 0.
pub const BASE_FREQUENCY_HZ: f64 = 0.5;
/// Upper bound on the span between the lowest and highest class frequency.
const MAX_FREQUENCY_SPAN: f64 = 24.0;
/// Ratio between neighbouring class frequencies in hard mode is the easy
/// ratio raised to this power.
const HARD_RATIO_EXPONENT: f64 = 0.1;

const ACC_AMPLITUDE: f64 = 2.0;
const MAX_ANGLE_RAD: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    Hann,
    RampUp,
    RampDown,
}

impl Envelope {
    /// Value and derivative with respect to normalised time `u ∈ [0, 1]`.
    fn eval(self, u: f64) -> (f64, f64) {
        match self {
            Envelope::Hann => ((PI * u).sin().powi(2), PI * (2.0 * PI * u).sin()),
            Envelope::RampUp => (u, 1.0),
            Envelope::RampDown => (1.0 - u, -1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub sequences_per_class: usize,
    /// Median of the log-normal length distribution, in samples.
    pub median_len: f64,
    /// Log-space standard deviation of the length distribution.
    pub length_sigma: f64,
    pub max_len: usize,
    pub channels: ChannelSet,
    /// Gaussian noise added to acceleration (m/s²) and, scaled by 10,
    /// angular velocity (deg/s).
    pub noise_floor: f64,
    /// Shrinks the gaps between class frequencies.
    pub hard: bool,
    /// Extra sequences of unstructured noise labelled as junk.
    pub junk_sequences: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            num_classes: 5,
            sequences_per_class: 40,
            median_len: 180.0,
            length_sigma: 0.35,
            max_len: 1200,
            channels: ChannelSet::All,
            noise_floor: 0.0,
            hard: false,
            junk_sequences: 0,
            sample_rate: DEFAULT_SAMPLE_RATE_HZ,
            seed: seed::DEFAULT_SEED,
        }
    }
}

impl SynthSpec {
    /// A dataset with a long right tail of slow executions.
    pub fn heavy_tail() -> Self {
        SynthSpec {
            length_sigma: 0.6,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_classes == 0 || self.num_classes > LabelTaxonomy::NUM_ITEMS {
            return bad(format!("class count must be within 1..=19, got {}", self.num_classes));
        }
        if self.sequences_per_class == 0 {
            return bad("at least one sequence per class is required".into());
        }
        if !(self.median_len.is_finite() && self.median_len >= MIN_SEQUENCE_LEN as f64) {
            return bad(format!("median length must be at least {MIN_SEQUENCE_LEN}"));
        }
        if !(self.length_sigma.is_finite() && self.length_sigma >= 0.0) {
            return bad("length sigma must be non-negative".into());
        }
        if self.max_len < MIN_SEQUENCE_LEN {
            return bad(format!("max length must be at least {MIN_SEQUENCE_LEN}"));
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return bad("noise floor must be non-negative".into());
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad("sample rate must be positive".into());
        }
        let top = self.class_frequency(self.num_classes - 1);
        if top >= self.sample_rate / 2.0 {
            return bad(format!("class frequency {top} Hz is not below Nyquist"));
        }
        Ok(())
    }

    fn frequency_ratio(&self) -> f64 {
        if self.num_classes < 2 {
            return 2.0;
        }
        let r = MAX_FREQUENCY_SPAN.powf(1.0 / (self.num_classes - 1) as f64).min(2.0);
        if self.hard {
            r.powf(HARD_RATIO_EXPONENT)
        } else {
            r
        }
    }

    pub fn class_frequency(&self, class: usize) -> f64 {
        BASE_FREQUENCY_HZ * self.frequency_ratio().powi(class as i32)
    }

    pub fn class_envelope(&self, class: usize) -> Envelope {
        [Envelope::Hann, Envelope::RampUp, Envelope::RampDown][class % 3]
    }

    /// Rotation axis of class `c`, cycling through a few fixed directions.
    fn class_axis(class: usize) -> Vector3<f64> {
        let axes = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 1.0),
            Vector3::new(1.0, 0.0, 1.0),
        ];
        axes[class % axes.len()].normalize()
    }

    fn draw_len<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
        let len = (self.median_len * (self.length_sigma * z).exp()).round();
        (len as usize).clamp(MIN_SEQUENCE_LEN, self.max_len)
    }
}

fn quat_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

fn add_noise<R: Rng + ?Sized>(samples: &mut Array2<f64>, floor: f64, rng: &mut R) {
    if floor == 0.0 {
        return;
    }
    let acc = Normal::new(0.0, floor).expect("finite");
    let gyr = Normal::new(0.0, 10.0 * floor).expect("finite");
    for c in 0..6 {
        let dist = if c < 3 { acc } else { gyr };
        for v in samples.row_mut(c).iter_mut() {
            *v += dist.sample(rng);
        }
    }
}

fn class_sequence(spec: &SynthSpec, index: usize, class: usize, label: ItemLabel) -> SensorSequence {
    let mut rng = seed::derived_rng(spec.seed, &format!("synth/{index}"));
    let len = spec.draw_len(&mut rng);
    let fs = spec.sample_rate;
    let freq = spec.class_frequency(class) * (1.0 + 0.02 * (rng.random::<f64>() - 0.5));
    let phase = 2.0 * PI * rng.random::<f64>();
    let amplitude = ACC_AMPLITUDE * (0.9 + 0.2 * rng.random::<f64>());
    let envelope = spec.class_envelope(class);
    let axis = SynthSpec::class_axis(class);
    let omega = 2.0 * PI * freq;
    let duration = (len.max(2) - 1) as f64 / fs;

    let mut samples = Array2::zeros((10, len));
    for t in 0..len {
        let time = t as f64 / fs;
        let u = time / duration;
        let (env, denv_du) = envelope.eval(u);
        let denv = denv_du / duration;
        let s = (omega * time + phase).sin();
        let c = (omega * time + phase).cos();

        let angle = MAX_ANGLE_RAD * env * s;
        let rate = MAX_ANGLE_RAD * (denv * s + env * omega * c);
        let q = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_unchecked(axis), angle);
        let q = UnitQuaternion::new_normalize(Quaternion::new(q.w, q.i, q.j, q.k));

        let world = Vector3::new(
            amplitude * env * s,
            0.5 * amplitude * env * (omega * time + phase + 1.0).sin(),
            0.25 * amplitude * env * c + GRAVITY,
        );
        let sensor_acc = q.inverse_transform_vector(&world);
        let gyr = axis * rate.to_degrees();
        let wxyz = quat_wxyz(&q);
        for k in 0..3 {
            samples[[k, t]] = sensor_acc[k];
            samples[[3 + k, t]] = gyr[k];
        }
        for k in 0..4 {
            samples[[6 + k, t]] = wxyz[k];
        }
    }
    add_noise(&mut samples, spec.noise_floor, &mut rng);
    SensorSequence {
        id: format!("syn{index:05}"),
        samples,
        sample_rate: fs,
        channels: ChannelRole::ALL.to_vec(),
        label,
        subject_id: format!("S{:02}", index % 10),
        side: Side::Left,
        score: Some((index % 4) as u8),
    }
}

fn junk_sequence(spec: &SynthSpec, index: usize) -> SensorSequence {
    let mut rng = seed::derived_rng(spec.seed, &format!("synth/junk/{index}"));
    let len = spec.draw_len(&mut rng);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut samples = Array2::zeros((10, len));
    for t in 0..len {
        for k in 0..3 {
            samples[[k, t]] = normal.sample(&mut rng);
            samples[[3 + k, t]] = 10.0 * normal.sample(&mut rng);
        }
        samples[[2, t]] += GRAVITY;
        samples[[6, t]] = 1.0;
    }
    SensorSequence {
        id: format!("junk{index:05}"),
        samples,
        sample_rate: spec.sample_rate,
        channels: ChannelRole::ALL.to_vec(),
        label: ItemLabel::junk(),
        subject_id: format!("S{:02}", index % 10),
        side: Side::Left,
        score: None,
    }
}

/// Builds the dataset described by `spec`. Class `c` takes the `c`-th item
/// of the domain-interleaved taxonomy order, and sequences are dealt to
/// classes round-robin.
pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let taxonomy = LabelTaxonomy::default();
    let items = taxonomy.interleaved_items();
    let total = spec.num_classes * spec.sequences_per_class;
    let mut sequences: Vec<SensorSequence> = (0..total)
        .into_par_iter()
        .map(|i| {
            let class = i % spec.num_classes;
            class_sequence(spec, i, class, items[class].clone())
        })
        .collect();
    sequences.extend(
        (0..spec.junk_sequences)
            .into_par_iter()
            .map(|j| junk_sequence(spec, j))
            .collect::<Vec<_>>(),
    );
    let ds = Dataset::new(sequences, taxonomy)?;
    match spec.channels {
        ChannelSet::All => Ok(ds),
        other => select_channels(&ds, other),
    }
}
