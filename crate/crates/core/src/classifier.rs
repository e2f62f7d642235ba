//! Ridge classification over PPV features.
//!
//! Targets are one-hot; the intercept is left unpenalised by centring both
//! features and targets. The penalty is picked from a grid by exact
//! leave-one-out residuals computed from one eigendecomposition, using the
//! Gram matrix `X Xᵀ` when samples are fewer than features and the
//! covariance `Xᵀ X` otherwise.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::ItemLabel;
use crate::error::{Error, Result};

/// Standard deviations below this are treated as constant columns.
pub const MIN_STD: f64 = 1e-12;

/// Ten log-spaced penalties from 1e-3 to 1e3.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..10).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 9.0)).collect()
}

/// Per-feature centring and scaling with the population (1/N) convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<'_, f64>) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::InvalidDataset("cannot standardize zero rows".into()));
        }
        let mean = features.mean_axis(Axis(0)).expect("n > 0");
        let var = features
            .axis_iter(Axis(0))
            .fold(Array1::<f64>::zeros(features.ncols()), |mut acc, row| {
                acc.zip_mut_with(&(&row - &mean), |a, d| *a += d * d);
                acc
            })
            / n as f64;
        let std = var
            .iter()
            .map(|v| {
                let s = v.sqrt();
                if s < MIN_STD {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Standardizer {
            mean: mean.to_vec(),
            std,
        })
    }

    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "{} features, standardizer expects {}",
                features.ncols(),
                self.mean.len()
            )));
        }
        let mut out = features.to_owned();
        for mut row in out.axis_iter_mut(Axis(0)) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    /// `[features × classes]`
    pub weights: Array2<f64>,
    pub intercepts: Vec<f64>,
    pub lambda: f64,
    pub class_order: Vec<ItemLabel>,
    /// Leave-one-out sum of squared residuals for each grid penalty.
    pub loo_errors: Vec<(f64, f64)>,
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigen-basis quantities shared by every penalty in the grid.
struct Spectrum {
    /// Eigenvalues, clamped at zero.
    values: Vec<f64>,
    /// `[n × r]` projection of centred samples on the basis (scaled so that
    /// the hat matrix is `P diag(g(s)) Pᵀ`).
    proj: Array2<f64>,
    /// `Pᵀ Y_c`, `[r × classes]`
    proj_targets: Array2<f64>,
    /// `true` when `proj` holds Gram eigenvectors (dual form).
    dual: bool,
    basis: Array2<f64>,
}

impl Spectrum {
    fn new(xc: &Array2<f64>, yc: &Array2<f64>) -> Result<Self> {
        let (n, f) = xc.dim();
        let dual = n <= f;
        let gram = if dual { xc.dot(&xc.t()) } else { xc.t().dot(xc) };
        let eig = SymmetricEigen::try_new(to_dmatrix(&gram), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("eigendecomposition did not converge".into()))?;
        let values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let basis = from_dmatrix(&eig.eigenvectors);
        let proj = if dual { basis.clone() } else { xc.dot(&basis) };
        let proj_targets = proj.t().dot(yc);
        Ok(Spectrum {
            values,
            proj,
            proj_targets,
            dual,
            basis,
        })
    }

    /// Per-direction shrink factor of the hat matrix.
    fn hat_factor(&self, k: usize, lambda: f64) -> f64 {
        let s = self.values[k];
        if self.dual {
            s / (s + lambda)
        } else {
            1.0 / (s + lambda)
        }
    }

    fn loo_error(&self, y: &Array2<f64>, y_mean: &Array1<f64>, lambda: f64) -> f64 {
        let (n, classes) = y.dim();
        let g: Array1<f64> = (0..self.values.len()).map(|k| self.hat_factor(k, lambda)).collect();
        let scaled = &self.proj_targets * &g.view().insert_axis(Axis(1));
        let fitted = self.proj.dot(&scaled);
        let mut total = 0.0;
        for i in 0..n {
            let row = self.proj.row(i);
            let h = 1.0 / n as f64 + row.iter().zip(&g).map(|(p, gk)| p * p * gk).sum::<f64>();
            let denom = (1.0 - h).max(1e-12);
            for c in 0..classes {
                let residual = y[[i, c]] - (y_mean[c] + fitted[[i, c]]);
                total += (residual / denom).powi(2);
            }
        }
        total
    }

    fn weights(&self, xc: &Array2<f64>, lambda: f64) -> Array2<f64> {
        let inv: Array1<f64> = self.values.iter().map(|s| 1.0 / (s + lambda)).collect();
        let scaled = &self.proj_targets * &inv.view().insert_axis(Axis(1));
        if self.dual {
            // W = X_cᵀ Q diag(1/(s+λ)) Qᵀ Y_c
            xc.t().dot(&self.basis.dot(&scaled))
        } else {
            // W = V diag(1/(s+λ)) Vᵀ X_cᵀ Y_c
            self.basis.dot(&scaled)
        }
    }
}

impl RidgeModel {
    /// Fits one-hot ridge regression, choosing λ from `lambda_grid` by
    /// leave-one-out error. Ties go to the earlier grid entry.
    pub fn fit(features: ArrayView2<'_, f64>, labels: &[ItemLabel], lambda_grid: &[f64]) -> Result<Self> {
        let (n, f) = features.dim();
        if labels.len() != n {
            return Err(Error::Shape(format!("{n} feature rows but {} labels", labels.len())));
        }
        if lambda_grid.is_empty() || lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter("penalty grid must hold positive values".into()));
        }
        let class_order: Vec<ItemLabel> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        if class_order.len() < 2 {
            return Err(Error::InvalidDataset("ridge classification needs at least two classes".into()));
        }
        if n < class_order.len() {
            return Err(Error::InvalidDataset(format!(
                "{n} samples cannot support {} classes",
                class_order.len()
            )));
        }
        if f == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }

        let mut y = Array2::<f64>::zeros((n, class_order.len()));
        for (i, l) in labels.iter().enumerate() {
            let c = class_order.binary_search(l).expect("collected above");
            y[[i, c]] = 1.0;
        }
        let x_mean = features.mean_axis(Axis(0)).expect("n > 0");
        let y_mean = y.mean_axis(Axis(0)).expect("n > 0");
        let xc = &features - &x_mean.view().insert_axis(Axis(0));
        let yc = &y - &y_mean.view().insert_axis(Axis(0));

        let spectrum = Spectrum::new(&xc, &yc)?;
        let loo_errors: Vec<(f64, f64)> = lambda_grid
            .iter()
            .map(|&l| (l, spectrum.loo_error(&y, &y_mean, l)))
            .collect();
        let (lambda, _) = loo_errors
            .iter()
            .copied()
            .fold((f64::NAN, f64::INFINITY), |best, (l, e)| if e < best.1 { (l, e) } else { best });
        if lambda.is_nan() {
            return Err(Error::Numerical("leave-one-out errors are not finite".into()));
        }
        let weights = spectrum.weights(&xc, lambda);
        let intercepts = (&y_mean - &x_mean.dot(&weights)).to_vec();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("ridge weights are not finite".into()));
        }
        Ok(RidgeModel {
            weights,
            intercepts,
            lambda,
            class_order,
            loo_errors,
        })
    }

    /// Class scores `[M × classes]`.
    pub fn decision_function(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.weights.nrows() {
            return Err(Error::Shape(format!(
                "{} features, model expects {}",
                features.ncols(),
                self.weights.nrows()
            )));
        }
        let b = Array1::from(self.intercepts.clone());
        Ok(features.dot(&self.weights) + b.view().insert_axis(Axis(0)))
    }

    /// Arg-max class per row; ties resolve to the earliest class in `class_order`.
    pub fn predict_scores(&self, scores: ArrayView2<'_, f64>) -> Vec<ItemLabel> {
        scores
            .axis_iter(Axis(0))
            .map(|row| {
                let mut best = 0;
                for (c, v) in row.iter().enumerate() {
                    if *v > row[best] {
                        best = c;
                    }
                }
                self.class_order[best].clone()
            })
            .collect()
    }
}

/// Standardizes raw features and predicts labels.
pub fn predict(model: &RidgeModel, standardizer: &Standardizer, features: ArrayView2<'_, f64>) -> Result<Vec<ItemLabel>> {
    let z = standardizer.apply(features)?;
    let scores = model.decision_function(z.view())?;
    Ok(model.predict_scores(scores.view()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;
    use rand_distr::{Distribution, Normal};

    fn labels(names: &[&str]) -> Vec<ItemLabel> {
        names.iter().map(|s| ItemLabel::new(*s)).collect()
    }

    fn random(n: usize, f: usize, s: u64) -> Array2<f64> {
        let mut rng = seed::rng(s);
        let normal = Normal::new(0.0, 1.0).unwrap();
        Array2::from_shape_fn((n, f), |_| normal.sample(&mut rng))
    }

    /// Gaussian elimination with partial pivoting, for the oracle.
    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        let n = a.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let factor = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= factor * a[col][k];
                }
                for k in 0..b[row].len() {
                    b[row][k] -= factor * b[col][k];
                }
            }
        }
        let m = b[0].len();
        let mut x = vec![vec![0.0; m]; n];
        for row in (0..n).rev() {
            for k in 0..m {
                let mut s = b[row][k];
                for j in row + 1..n {
                    s -= a[row][j] * x[j][k];
                }
                x[row][k] = s / a[row][row];
            }
        }
        x
    }

    /// Centred normal equations `(XcᵀXc + λI) W = XcᵀYc`, solved directly.
    fn normal_equation_weights(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Array2<f64> {
        let (n, f) = x.dim();
        let k = y.ncols();
        let xm: Vec<f64> = (0..f).map(|j| (0..n).map(|i| x[[i, j]]).sum::<f64>() / n as f64).collect();
        let ym: Vec<f64> = (0..k).map(|j| (0..n).map(|i| y[[i, j]]).sum::<f64>() / n as f64).collect();
        let mut a = vec![vec![0.0; f]; f];
        let mut b = vec![vec![0.0; k]; f];
        for p in 0..f {
            for q in 0..f {
                a[p][q] = (0..n).map(|i| (x[[i, p]] - xm[p]) * (x[[i, q]] - xm[q])).sum::<f64>();
            }
            a[p][p] += lambda;
            for c in 0..k {
                b[p][c] = (0..n).map(|i| (x[[i, p]] - xm[p]) * (y[[i, c]] - ym[c])).sum::<f64>();
            }
        }
        let w = solve(a, b);
        Array2::from_shape_fn((f, k), |(i, j)| w[i][j])
    }

    /// Brute-force leave-one-out: refit without each row in turn.
    fn brute_force_loo(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> f64 {
        let n = x.nrows();
        let mut total = 0.0;
        for i in 0..n {
            let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
            let xs = x.select(Axis(0), &keep);
            let ys = y.select(Axis(0), &keep);
            let w = normal_equation_weights(&xs, &ys, lambda);
            let xm = xs.mean_axis(Axis(0)).unwrap();
            let ym = ys.mean_axis(Axis(0)).unwrap();
            let b = &ym - &xm.dot(&w);
            let pred = x.row(i).dot(&w) + &b;
            total += (&y.row(i) - &pred).mapv(|r| r * r).sum();
        }
        total
    }

    fn one_hot(labels: &[ItemLabel], order: &[ItemLabel]) -> Array2<f64> {
        Array2::from_shape_fn((labels.len(), order.len()), |(i, c)| (labels[i] == order[c]) as u8 as f64)
    }

    #[test]
    fn standardizer_population_convention() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(x.view()).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.apply(x.view()).unwrap();
        assert_eq!(z, array![[-1.0, 0.0], [1.0, 0.0]]);
        assert!(s.apply(array![[1.0]].view()).is_err());
    }

    #[test]
    fn standardized_training_data_has_zero_mean() {
        let x = random(30, 7, 3) * 4.0 + 2.5;
        let s = Standardizer::fit(x.view()).unwrap();
        let z = s.apply(x.view()).unwrap();
        for m in z.mean_axis(Axis(0)).unwrap() {
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn matches_normal_equations_in_both_regimes() {
        for (n, f) in [(20, 5), (8, 15)] {
            let x = random(n, f, 11);
            let names: Vec<&str> = (0..n).map(|i| ["a", "b", "c"][i % 3]).collect();
            let y_labels = labels(&names);
            for lambda in [0.01, 1.0, 30.0] {
                let m = RidgeModel::fit(x.view(), &y_labels, &[lambda]).unwrap();
                let y = one_hot(&y_labels, &m.class_order);
                let oracle = normal_equation_weights(&x, &y, lambda);
                for (a, b) in m.weights.iter().zip(oracle.iter()) {
                    assert!((a - b).abs() < 1e-8, "n={n} f={f} λ={lambda}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let x = random(25, 40, 5);
        let names: Vec<&str> = (0..25).map(|i| ["a", "b", "c", "d"][i % 4]).collect();
        let y_labels = labels(&names);
        let m = RidgeModel::fit(x.view(), &y_labels, &default_lambda_grid()).unwrap();
        let y = one_hot(&y_labels, &m.class_order);
        let xm = x.mean_axis(Axis(0)).unwrap();
        let ym = y.mean_axis(Axis(0)).unwrap();
        let xc = &x - &xm;
        let yc = &y - &ym;
        let lhs = xc.t().dot(&xc).dot(&m.weights) + &m.weights * m.lambda;
        let rhs = xc.t().dot(&yc);
        let rel = (&lhs - &rhs).mapv(|v| v * v).sum().sqrt() / rhs.mapv(|v| v * v).sum().sqrt();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn loo_shortcut_matches_brute_force() {
        for (n, f) in [(12, 4), (9, 20)] {
            let x = random(n, f, 21);
            let names: Vec<&str> = (0..n).map(|i| ["a", "b", "c"][i % 3]).collect();
            let y_labels = labels(&names);
            let grid = [0.05, 0.5, 5.0];
            let m = RidgeModel::fit(x.view(), &y_labels, &grid).unwrap();
            let y = one_hot(&y_labels, &m.class_order);
            for (lambda, err) in &m.loo_errors {
                let brute = brute_force_loo(&x, &y, *lambda);
                assert!((err - brute).abs() < 1e-8 * brute.max(1.0), "{err} vs {brute}");
            }
        }
    }

    #[test]
    fn separable_clusters_are_fit_exactly() {
        let x = array![[-3.0], [-2.5], [-2.0], [2.0], [2.5], [3.0]];
        let y = labels(&["lo", "lo", "lo", "hi", "hi", "hi"]);
        let m = RidgeModel::fit(x.view(), &y, &[1e-3]).unwrap();
        let s = Standardizer::fit(x.view()).unwrap();
        let z = s.apply(x.view()).unwrap();
        let m2 = RidgeModel::fit(z.view(), &y, &[1e-3]).unwrap();
        assert_eq!(predict(&m2, &s, x.view()).unwrap(), y);
        assert_eq!(m.predict_scores(m.decision_function(x.view()).unwrap().view()), y);
    }

    #[test]
    fn huge_penalty_collapses_to_majority_class() {
        let x = random(7, 3, 1);
        let y = labels(&["a", "a", "a", "a", "b", "b", "c"]);
        let m = RidgeModel::fit(x.view(), &y, &[1e9]).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        let pred = m.predict_scores(m.decision_function(random(5, 3, 2).view()).unwrap().view());
        assert!(pred.iter().all(|l| l.as_str() == "a"));
    }

    #[test]
    fn ties_resolve_to_first_class() {
        let m = RidgeModel {
            weights: Array2::zeros((1, 3)),
            intercepts: vec![0.0, 0.0, 0.0],
            lambda: 1.0,
            class_order: labels(&["x", "y", "z"]),
            loo_errors: vec![],
        };
        let scores = array![[0.5, 0.5, 0.1], [0.0, 0.2, 0.2]];
        assert_eq!(m.predict_scores(scores.view()), labels(&["x", "y"]));
        let scaled = scores.mapv(|v| v * 7.5);
        assert_eq!(m.predict_scores(scaled.view()), labels(&["x", "y"]));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let x = random(4, 3, 1);
        assert!(RidgeModel::fit(x.view(), &labels(&["a", "a", "a", "a"]), &[1.0]).is_err());
        assert!(RidgeModel::fit(x.view(), &labels(&["a", "b", "a"]), &[1.0]).is_err());
        assert!(RidgeModel::fit(x.view(), &labels(&["a", "b", "a", "b"]), &[]).is_err());
        assert!(RidgeModel::fit(x.view(), &labels(&["a", "b", "a", "b"]), &[-1.0]).is_err());
    }

    #[test]
    fn prediction_is_row_independent() {
        let x = random(30, 6, 9);
        let names: Vec<&str> = (0..30).map(|i| ["a", "b", "c"][i % 3]).collect();
        let y = labels(&names);
        let s = Standardizer::fit(x.view()).unwrap();
        let m = RidgeModel::fit(s.apply(x.view()).unwrap().view(), &y, &default_lambda_grid()).unwrap();
        let test = random(10, 6, 10);
        let p = predict(&m, &s, test.view()).unwrap();
        let rev: Vec<usize> = (0..10).rev().collect();
        let mut p_rev = predict(&m, &s, test.select(Axis(0), &rev).view()).unwrap();
        p_rev.reverse();
        assert_eq!(p, p_rev);
    }

    #[test]
    fn default_grid_spans_six_decades() {
        let g = default_lambda_grid();
        assert_eq!(g.len(), 10);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[9] - 1e3).abs() < 1e-9);
    }
}
