//! L2-regularized multinomial logistic regression on penultimate features.
//!
//! Parameters are a `(D+1)×K` matrix: rows `0..D` hold the weights `W`, row
//! `D` holds the bias `b`, so logits are `G = X W + 1 bᵀ`. The objective is
//! the mean cross-entropy plus `‖θ‖²_F / (2β)` with the bias included.

use crate::error::{Error, Result};
use crate::numerics::lbfgs::{minimize_convex, OptimizerConfig};
use crate::Matrix;

#[derive(Debug, Clone)]
pub struct SoftmaxFit {
    pub theta: Matrix,
    /// Regularized objective `L̂(θ) + ‖θ‖²/(2β)` at `theta`.
    pub loss: f64,
    /// Mean cross-entropy `L̂(θ)` alone.
    pub empirical_risk: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub(crate) fn check_labels(labels: &[usize], num_classes: usize, n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::validation(format!("{} labels for {} feature rows", labels.len(), n)));
    }
    if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= num_classes) {
        return Err(Error::validation(format!("label {y} at row {i} is not below K = {num_classes}")));
    }
    Ok(())
}

/// Features with a trailing column of ones.
pub(crate) fn augment(features: &Matrix) -> Matrix {
    let d = features.ncols();
    features.clone().insert_column(d, 1.0)
}

/// Row-wise softmax of the logits `X̃ θ`, returned as an `N×K` matrix.
pub fn softmax_probs(features: &Matrix, theta: &Matrix) -> Matrix {
    let mut logits = augment(features) * theta;
    softmax_rows(&mut logits);
    logits
}

/// In-place row softmax; returns the per-row log normalizers.
pub(crate) fn softmax_rows(logits: &mut Matrix) -> Vec<f64> {
    let (n, k) = logits.shape();
    let mut lse = Vec::with_capacity(n);
    for i in 0..n {
        let mut max = f64::NEG_INFINITY;
        for c in 0..k {
            max = max.max(logits[(i, c)]);
        }
        let mut sum = 0.0;
        for c in 0..k {
            let e = (logits[(i, c)] - max).exp();
            logits[(i, c)] = e;
            sum += e;
        }
        for c in 0..k {
            logits[(i, c)] /= sum;
        }
        lse.push(max + sum.ln());
    }
    lse
}

/// Mean cross-entropy `L̂(θ)` and its gradient with respect to `θ`.
pub(crate) fn cross_entropy_with_grad(augmented: &Matrix, labels: &[usize], theta: &Matrix) -> (f64, Matrix) {
    let n = augmented.nrows();
    let mut probs = augmented * theta;
    let mut total = 0.0;
    for i in 0..n {
        total -= probs[(i, labels[i])];
    }
    let lse = softmax_rows(&mut probs);
    total += lse.iter().sum::<f64>();
    for (i, &y) in labels.iter().enumerate() {
        probs[(i, y)] -= 1.0;
    }
    let grad = augmented.tr_mul(&probs) / n as f64;
    (total / n as f64, grad)
}

/// Mean cross-entropy of `θ` on `(features, labels)`.
pub fn cross_entropy(features: &Matrix, labels: &[usize], theta: &Matrix) -> Result<f64> {
    check_labels(labels, theta.ncols(), features.nrows())?;
    if theta.nrows() != features.ncols() + 1 {
        return Err(Error::validation("theta must have D+1 rows"));
    }
    Ok(cross_entropy_with_grad(&augment(features), labels, theta).0)
}

/// Regularized objective value and gradient at `θ`.
pub fn regularized_objective(features: &Matrix, labels: &[usize], theta: &Matrix, beta: f64) -> Result<(f64, Matrix)> {
    check_labels(labels, theta.ncols(), features.nrows())?;
    let (risk, grad) = cross_entropy_with_grad(&augment(features), labels, theta);
    Ok((risk + theta.norm_squared() / (2.0 * beta), grad + theta / beta))
}

/// Arg-max class per row (ties resolve to the lowest index).
pub fn predict(features: &Matrix, theta: &Matrix) -> Vec<usize> {
    let logits = augment(features) * theta;
    (0..logits.nrows())
        .map(|i| {
            let mut best = 0;
            for c in 1..logits.ncols() {
                if logits[(i, c)] > logits[(i, best)] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

pub fn fit_l2_softmax(features: &Matrix, labels: &[usize], num_classes: usize, beta: f64) -> Result<SoftmaxFit> {
    fit_l2_softmax_with(features, labels, num_classes, beta, &OptimizerConfig::default())
}

/// Fit from zero initialization with an explicit optimizer configuration.
pub fn fit_l2_softmax_with(
    features: &Matrix,
    labels: &[usize],
    num_classes: usize,
    beta: f64,
    config: &OptimizerConfig,
) -> Result<SoftmaxFit> {
    let (n, d) = features.shape();
    if n == 0 {
        return Err(Error::validation("fit_l2_softmax needs at least one example"));
    }
    if num_classes == 0 {
        return Err(Error::validation("num_classes must be positive"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::validation(format!("beta must be positive and finite, got {beta}")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("features contain non-finite values"));
    }
    check_labels(labels, num_classes, n)?;

    let augmented = augment(features);
    let rows = d + 1;
    let objective = |x: &[f64], g: &mut [f64]| {
        let theta = Matrix::from_column_slice(rows, num_classes, x);
        let (risk, grad) = cross_entropy_with_grad(&augmented, labels, &theta);
        let mut reg = 0.0;
        for ((gi, gr), t) in g.iter_mut().zip(grad.iter()).zip(x) {
            *gi = gr + t / beta;
            reg += t * t;
        }
        risk + reg / (2.0 * beta)
    };
    let min = minimize_convex(objective, &vec![0.0; rows * num_classes], config)?;
    let theta = Matrix::from_column_slice(rows, num_classes, &min.argmin);
    let empirical_risk = cross_entropy_with_grad(&augmented, labels, &theta).0;
    Ok(SoftmaxFit {
        theta,
        loss: min.value,
        empirical_risk,
        converged: min.converged,
        iterations: min.iterations,
        gradient_norm: min.gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_features_give_zero_theta_and_log_k() {
        for k in [2usize, 3, 5] {
            let labels: Vec<usize> = (0..2 * k).map(|i| i % k).collect();
            let x = Matrix::zeros(2 * k, 3);
            for beta in [0.5, 10.0, 1e4] {
                let fit = fit_l2_softmax(&x, &labels, k, beta).unwrap();
                assert!(fit.theta.amax() < 1e-12);
                assert!((fit.loss - (k as f64).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_hot_features_loss_decreases_with_beta() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let x = Matrix::from_fn(6, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
        let mut last = f64::INFINITY;
        for beta in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let fit = fit_l2_softmax(&x, &labels, 3, beta).unwrap();
            assert!(fit.converged);
            assert!(fit.loss <= last + 1e-9);
            last = fit.loss;
        }
        let fit = fit_l2_softmax(&x, &labels, 3, 1e4).unwrap();
        assert!(fit.empirical_risk < 0.05);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let x = Matrix::zeros(2, 1);
        assert!(matches!(fit_l2_softmax(&x, &[0, 2], 2, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn predictions_follow_logits() {
        let theta = Matrix::from_row_slice(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        let x = Matrix::from_row_slice(3, 1, &[2.0, -2.0, 0.0]);
        assert_eq!(predict(&x, &theta), vec![0, 1, 0]);
    }
}
