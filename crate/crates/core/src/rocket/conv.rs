//! Dilated convolution and proportion-of-positive-values pooling.
//!
//! Output sample `t` is `Σ_j w[j] · x[t + (j − 4)·d]`, so the kernel centre is
//! aligned with `t`. Accumulation always runs over taps in index order and
//! over channels in ascending order; since every weight is −1 or +2 the
//! products are exact, and the optimized and reference paths agree bit for bit.

use super::kernels::{KernelPattern, KERNEL_LEN};
use crate::error::{Error, Result};

const CENTER: isize = (KERNEL_LEN / 2) as isize;

/// Writes the zero-padded (full-length) convolution of `x` into `out`.
pub(crate) fn convolve_padded_into(x: &[f64], weights: &[f64; KERNEL_LEN], dilation: usize, out: &mut [f64]) {
    let n = x.len() as isize;
    let d = dilation as isize;
    debug_assert_eq!(out.len(), x.len());
    out.fill(0.0);
    // Built tap by tap so the summation order matches the scalar definition.
    for (j, &w) in weights.iter().enumerate() {
        let shift = (j as isize - CENTER) * d;
        // t + shift must lie in [0, n)
        let lo = (-shift).clamp(0, n);
        let hi = (n - shift).clamp(lo, n);
        if lo >= hi {
            continue;
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let src = &x[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
        for (o, &v) in out[lo..hi].iter_mut().zip(src) {
            *o += w * v;
        }
    }
}

/// Range of output positions whose receptive field lies fully inside the series.
pub(crate) fn valid_range(len: usize, dilation: usize) -> Option<std::ops::Range<usize>> {
    let half = (KERNEL_LEN / 2) * dilation;
    if len < 2 * half + 1 {
        None
    } else {
        Some(half..len - half)
    }
}

/// Convolves one series. With `pad`, out-of-range samples read as zero and the
/// output has the input's length; without, only fully supported positions
/// are returned.
pub fn dilated_convolve(x: &[f64], kernel: &KernelPattern, dilation: usize, pad: bool) -> Result<Vec<f64>> {
    if dilation == 0 {
        return Err(Error::InvalidParameter("dilation must be positive".into()));
    }
    if x.is_empty() {
        return Err(Error::InvalidParameter("cannot convolve an empty series".into()));
    }
    let mut out = vec![0.0; x.len()];
    if pad {
        convolve_padded_into(x, &kernel.weights_f64(), dilation, &mut out);
        return Ok(out);
    }
    let range = valid_range(x.len(), dilation).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "series of length {} is too short for an unpadded convolution at dilation {dilation}",
            x.len()
        ))
    })?;
    convolve_padded_into(x, &kernel.weights_f64(), dilation, &mut out);
    Ok(out[range].to_vec())
}

/// Fraction of entries strictly greater than `bias`.
pub fn ppv(conv_output: &[f64], bias: f64) -> Result<f64> {
    if conv_output.is_empty() {
        return Err(Error::InvalidParameter("ppv of an empty series".into()));
    }
    Ok(ppv_unchecked(conv_output, bias))
}

#[inline]
pub(crate) fn ppv_unchecked(conv_output: &[f64], bias: f64) -> f64 {
    let positive = conv_output.iter().filter(|&&v| v > bias).count();
    positive as f64 / conv_output.len() as f64
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("quantile of an empty series".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("quantile {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}
