use serde::{Deserialize, Serialize};

use super::kernels::{KERNEL_LEN, NUM_KERNELS};
use crate::error::{Error, Result};

/// Upper bound on exponent samples per kernel.
pub const MAX_DILATIONS_PER_KERNEL: usize = 32;

/// Biases are drawn from the 0.25 / 0.5 / 0.75 quantiles, so budgets are
/// split in units of three where possible.
pub const BIAS_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// Dilations, per-kernel feature budget at each dilation, and the padding
/// flag of every (dilation, kernel) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationPlan {
    pub input_length: usize,
    pub dilations: Vec<usize>,
    /// Features contributed by each kernel at the matching dilation.
    pub features_per_dilation: Vec<usize>,
    /// Indexed by pair, see [`DilationPlan::pair_index`].
    pub padding: Vec<bool>,
}

impl DilationPlan {
    pub fn num_pairs(&self) -> usize {
        self.dilations.len() * NUM_KERNELS
    }

    /// Pairs are enumerated dilation-major, kernel-minor.
    pub fn pair_index(&self, dilation_index: usize, kernel_index: usize) -> usize {
        dilation_index * NUM_KERNELS + kernel_index
    }

    pub fn num_features(&self) -> usize {
        NUM_KERNELS * self.features_per_dilation.iter().sum::<usize>()
    }

    /// Offset of each pair's first feature in the feature vector, plus the total.
    pub fn feature_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.num_pairs() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &self.features_per_dilation {
            for _ in 0..NUM_KERNELS {
                acc += n;
                offsets.push(acc);
            }
        }
        offsets
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.dilations.len();
        if n == 0 || self.features_per_dilation.len() != n || self.padding.len() != n * NUM_KERNELS {
            return Err(Error::Serde("inconsistent dilation plan".into()));
        }
        if self.features_per_dilation.contains(&0) || self.dilations.contains(&0) {
            return Err(Error::Serde("dilation plan has empty entries".into()));
        }
        let max = *self.dilations.iter().max().expect("non-empty");
        if (KERNEL_LEN - 1) * max > self.input_length.saturating_sub(1) {
            return Err(Error::Serde(format!(
                "dilation {max} too large for input length {}",
                self.input_length
            )));
        }
        Ok(())
    }
}

/// Plans dilations for series of `input_length` samples and a total of
/// `target_features` features (a positive multiple of 84).
///
/// Exponents are spaced uniformly over `[0, log2((L−1)/8)]`; each exponent
/// `e` yields dilation `⌊2^e⌋` and repeated dilations merge, accumulating
/// their share of the per-kernel budget.
pub fn plan_dilations(input_length: usize, target_features: usize) -> Result<DilationPlan> {
    if input_length < KERNEL_LEN {
        return Err(Error::InvalidParameter(format!(
            "input length {input_length} is shorter than the kernel length {KERNEL_LEN}"
        )));
    }
    if target_features < NUM_KERNELS || !target_features.is_multiple_of(NUM_KERNELS) {
        return Err(Error::InvalidParameter(format!(
            "feature count {target_features} must be a positive multiple of {NUM_KERNELS}"
        )));
    }
    let per_kernel = target_features / NUM_KERNELS;
    let triples = per_kernel / BIAS_QUANTILES.len();
    let singles = per_kernel % BIAS_QUANTILES.len();

    let points = triples.clamp(1, MAX_DILATIONS_PER_KERNEL);
    let max_exponent = ((input_length - 1) as f64 / (KERNEL_LEN - 1) as f64).log2();
    let span_limit = (input_length - 1) / (KERNEL_LEN - 1);

    let mut dilations: Vec<usize> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for i in 0..points {
        let e = if points == 1 {
            0.0
        } else {
            max_exponent * i as f64 / (points - 1) as f64
        };
        let d = (e.exp2().floor() as usize).clamp(1, span_limit);
        match dilations.last() {
            Some(&last) if last == d => *counts.last_mut().expect("paired") += 1,
            _ => {
                dilations.push(d);
                counts.push(1);
            }
        }
    }

    let mut units: Vec<usize> = counts.iter().map(|c| c * triples / points).collect();
    let mut remainder = triples - units.iter().sum::<usize>();
    for u in units.iter_mut() {
        if remainder == 0 {
            break;
        }
        *u += 1;
        remainder -= 1;
    }
    let mut features_per_dilation: Vec<usize> = units.iter().map(|u| u * BIAS_QUANTILES.len()).collect();
    features_per_dilation[0] += singles;

    let padding = (0..dilations.len())
        .flat_map(|di| (0..NUM_KERNELS).map(move |k| (di + k) % 2 == 0))
        .collect();

    let plan = DilationPlan {
        input_length,
        dilations,
        features_per_dilation,
        padding,
    };
    debug_assert_eq!(plan.num_features(), target_features);
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_length_gives_single_unit_dilation() {
        let p = plan_dilations(9, 9828).unwrap();
        assert_eq!(p.dilations, vec![1]);
        assert_eq!(p.features_per_dilation, vec![117]);
        assert_eq!(p.num_features(), 9828);
    }

    #[test]
    fn span_constraint_at_318() {
        let p = plan_dilations(318, 9828).unwrap();
        assert!(*p.dilations.iter().max().unwrap() <= 39);
        assert_eq!(*p.dilations.last().unwrap(), 39);
        assert!(p.dilations.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.num_features(), 9828);
        assert!(p.features_per_dilation.iter().all(|f| f % 3 == 0));
    }

    #[test]
    fn budget_is_conserved_for_many_shapes() {
        for len in [9, 10, 17, 64, 100, 257, 1000, 5000] {
            for target in [84, 168, 252, 336, 840, 9828, 10_080] {
                let p = plan_dilations(len, target).unwrap();
                assert_eq!(p.num_features(), target, "len {len} target {target}");
                assert!(p.features_per_dilation.iter().all(|&f| f > 0));
                assert!(8 * p.dilations.iter().max().unwrap() < len);
                p.check().unwrap();
                assert_eq!(*p.feature_offsets().last().unwrap(), target);
            }
        }
    }

    #[test]
    fn padding_flags_split_evenly() {
        let p = plan_dilations(300, 9828).unwrap();
        let padded = p.padding.iter().filter(|&&b| b).count();
        assert_eq!(padded * 2, p.padding.len());
        // A kernel alternates padding mode across consecutive dilations.
        assert_ne!(p.padding[p.pair_index(0, 5)], p.padding[p.pair_index(1, 5)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(plan_dilations(8, 9828).is_err());
        assert!(plan_dilations(100, 83).is_err());
        assert!(plan_dilations(100, 9829).is_err());
    }
}
