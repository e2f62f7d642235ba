//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use arat_core::rocket::RocketModel;
use arat_core::seed;
use ndarray::{Array3, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Direct evaluation of `y[t] = Σ_j w[j] · x[t + (j − 4)d]`, reading zero
/// outside the series when `pad`, else only over fully supported `t`.
pub fn naive_conv(x: &[f64], w: &[i8; 9], d: usize, pad: bool) -> Vec<f64> {
    let n = x.len() as isize;
    let d = d as isize;
    let ts: Vec<isize> = if pad { (0..n).collect() } else { (4 * d..n - 4 * d).collect() };
    ts.into_iter()
        .map(|t| {
            let mut acc = 0.0;
            for (j, &wj) in w.iter().enumerate() {
                let i = t + (j as isize - 4) * d;
                if (0..n).contains(&i) {
                    acc += wj as f64 * x[i as usize];
                }
            }
            acc
        })
        .collect()
}

/// Linear-interpolation quantile between order statistics.
pub fn naive_quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[lo];
    }
    v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
}

pub fn naive_ppv(y: &[f64], bias: f64) -> f64 {
    y.iter().filter(|&&v| v > bias).count() as f64 / y.len() as f64
}

/// Output of pair `p` of `model` on a `[C × L]` series, channels summed in
/// ascending order.
pub fn naive_pair_output(model: &RocketModel, x: ArrayView2<'_, f64>, p: usize) -> Vec<f64> {
    let di = p / 84;
    let k = p % 84;
    let w = model.kernels[k].weights();
    let d = model.plan.dilations[di];
    let pad = model.plan.padding[p];
    let mut sum: Option<Vec<f64>> = None;
    for &c in &model.channel_assignments[p] {
        let row = x.row(c).to_vec();
        let y = naive_conv(&row, &w, d, pad);
        sum = Some(match sum {
            None => y.iter().map(|v| 0.0 + v).collect(),
            Some(s) => s.iter().zip(&y).map(|(a, b)| a + b).collect(),
        });
    }
    sum.expect("pairs have at least one channel")
}

/// Feature vector of one series, rebuilt from the model's parameters.
pub fn naive_transform_one(model: &RocketModel, x: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(model.num_features);
    for p in 0..model.plan.num_pairs() {
        let y = naive_pair_output(model, x, p);
        let count = model.plan.features_per_dilation[p / 84];
        for _ in 0..count {
            out.push(naive_ppv(&y, model.biases[out.len()]));
        }
    }
    out
}

pub fn random_tensor(n: usize, c: usize, l: usize, s: u64) -> Array3<f64> {
    let mut rng = seed::rng(s);
    let normal = Normal::new(0.0, 1.0).unwrap();
    Array3::from_shape_fn((n, c, l), |_| normal.sample(&mut rng))
}

/// Random values on a 1/256 grid, so sums of a few terms are exact.
pub fn dyadic_tensor(n: usize, c: usize, l: usize, s: u64) -> Array3<f64> {
    let mut rng = seed::rng(s);
    Array3::from_shape_fn((n, c, l), |_| rng.random_range(-2048i32..=2048) as f64 / 256.0)
}
