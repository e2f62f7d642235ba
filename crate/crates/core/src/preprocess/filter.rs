//! Zero-phase Butterworth low-pass filtering.
//!
//! The filter is designed by bilinear transform with frequency pre-warping and
//! realised as cascaded second-order sections in transposed direct form II.
//! Each section has unit DC gain. Zero-phase application runs the cascade
//! forward, then backward over an odd extension of the signal, with every
//! section started from its steady state for the edge sample.

use std::f64::consts::PI;

use crate::data::{ChannelRole, SensorSequence};
use crate::error::{Error, Result};

pub const DEFAULT_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// State `(z1, z2)` reached after an infinitely long constant input `x0`.
    fn steady_state(&self, x0: f64) -> (f64, f64) {
        let gain = (self.b0 + self.b1 + self.b2) / (1.0 + self.a1 + self.a2);
        let y0 = gain * x0;
        let z2 = self.b2 * x0 - self.a2 * y0;
        let z1 = self.b1 * x0 - self.a1 * y0 + z2;
        (z1, z2)
    }

    fn run(&self, signal: &mut [f64]) {
        let Some(&first) = signal.first() else {
            return;
        };
        let (mut z1, mut z2) = self.steady_state(first);
        for x in signal.iter_mut() {
            let input = *x;
            let y = self.b0 * input + z1;
            z1 = self.b1 * input - self.a1 * y + z2;
            z2 = self.b2 * input - self.a2 * y;
            *x = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthLowpass {
    sections: Vec<Biquad>,
    cutoff_hz: f64,
    sample_rate: f64,
}

impl ButterworthLowpass {
    /// Designs an even-order low-pass filter.
    pub fn new(order: usize, cutoff_hz: f64, sample_rate: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "filter order must be even and positive, got {order}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {cutoff_hz} Hz must lie strictly between 0 and the Nyquist frequency {} Hz",
                sample_rate / 2.0
            )));
        }
        let k = (PI * cutoff_hz / sample_rate).tan();
        let k2 = k * k;
        let sections = (0..order / 2)
            .map(|i| {
                // Pole pair i of the analog prototype sits at angle (2i+1)π/(2N) from the imaginary axis.
                let inv_q = 2.0 * ((2 * i + 1) as f64 * PI / (2 * order) as f64).sin();
                let norm = 1.0 / (1.0 + k * inv_q + k2);
                let b0 = k2 * norm;
                Biquad {
                    b0,
                    b1: 2.0 * b0,
                    b2: b0,
                    a1: 2.0 * (k2 - 1.0) * norm,
                    a2: (1.0 - k * inv_q + k2) * norm,
                }
            })
            .collect();
        Ok(ButterworthLowpass {
            sections,
            cutoff_hz,
            sample_rate,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Single causal pass.
    pub fn filter(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = signal.to_vec();
        for s in &self.sections {
            s.run(&mut out);
        }
        out
    }

    /// Forward-backward pass: zero phase, squared magnitude response.
    pub fn filtfilt(&self, signal: &[f64]) -> Vec<f64> {
        let n = signal.len();
        if n < 2 {
            return signal.to_vec();
        }
        let pad = self.pad_len().min(n - 1);
        let (first, last) = (signal[0], signal[n - 1]);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();
        for s in &self.sections {
            s.run(&mut ext);
        }
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Applies the zero-phase filter to the listed channels; other channels are copied.
pub fn butterworth_lowpass(
    seq: &SensorSequence,
    cutoff_hz: f64,
    channels: &[ChannelRole],
) -> Result<SensorSequence> {
    let filter = ButterworthLowpass::new(DEFAULT_ORDER, cutoff_hz, seq.sample_rate)?;
    let mut out = seq.clone();
    for role in channels {
        if let Some(c) = seq.channel_index(*role) {
            let row: Vec<f64> = seq.samples.row(c).to_vec();
            let filtered = filter.filtfilt(&row);
            for (dst, v) in out.samples.row_mut(c).iter_mut().zip(filtered) {
                *dst = v;
            }
        }
    }
    Ok(out)
}
