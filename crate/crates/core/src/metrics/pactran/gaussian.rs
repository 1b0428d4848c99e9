use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::softmax_reg::{augment, check_labels, softmax_rows};
use crate::numerics::{fit_l2_softmax, SoftmaxFit};
use crate::Matrix;

#[derive(Debug, Clone, Serialize)]
pub struct GaussResult {
    #[serde(skip)]
    pub theta_star: Matrix,
    /// `L̂(θ*) + ‖θ*‖²/(2β)`.
    pub rer: f64,
    pub fr: f64,
    pub metric: f64,
    /// `σ₀²/σ*²`.
    pub sigma_ratio: f64,
    pub trace_hessian: f64,
    pub beta: f64,
    pub sigma0_sq: f64,
    /// `β/σ₀²`.
    pub lambda: f64,
    pub d_eff: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// Trace of the Hessian of the mean cross-entropy with respect to all
/// weights and biases at `theta`.
pub fn trace_hessian_ce(features: &Matrix, labels: &[usize], theta: &Matrix) -> Result<f64> {
    let (n, d) = features.shape();
    if theta.nrows() != d + 1 {
        return Err(Error::validation(format!(
            "theta has {} rows, expected D + 1 = {}",
            theta.nrows(),
            d + 1
        )));
    }
    if n == 0 {
        return Err(Error::validation("trace_hessian_ce needs at least one example"));
    }
    check_labels(labels, theta.ncols(), n)?;
    let mut s = augment(features) * theta;
    softmax_rows(&mut s);
    let mut total = 0.0;
    for i in 0..n {
        let sq_norm: f64 = features.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0;
        let var: f64 = s.row(i).iter().map(|p| p - p * p).sum();
        total += sq_norm * var;
    }
    Ok(total / n as f64)
}

/// Gaussian-prior PACTran score `RER + FR` from an already fitted head.
pub fn pactran_gaussian_from_fit(
    features: &Matrix,
    labels: &[usize],
    fit: &SoftmaxFit,
    beta: f64,
    sigma0_sq: f64,
) -> Result<GaussResult> {
    if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
        return Err(Error::validation(format!("sigma0_sq must be positive, got {sigma0_sq}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::validation(format!("beta must be positive, got {beta}")));
    }
    let k = fit.theta.ncols();
    let d_eff = features.ncols() + 1;
    let trace_hessian = trace_hessian_ce(features, labels, &fit.theta)?;
    let kd = (k * d_eff) as f64;
    let sigma_ratio = 1.0 + beta / kd * trace_hessian;
    let fr = kd * sigma0_sq / (2.0 * beta) * sigma_ratio.ln();
    Ok(GaussResult {
        theta_star: fit.theta.clone(),
        rer: fit.loss,
        fr,
        metric: fit.loss + fr,
        sigma_ratio,
        trace_hessian,
        beta,
        sigma0_sq,
        lambda: beta / sigma0_sq,
        d_eff,
        converged: fit.converged,
        iterations: fit.iterations,
    })
}

pub fn pactran_gaussian(
    features: &Matrix,
    labels: &[usize],
    num_classes: usize,
    beta: f64,
    sigma0_sq: f64,
) -> Result<(f64, GaussResult)> {
    let fit = fit_l2_softmax(features, labels, num_classes, beta)?;
    let result = pactran_gaussian_from_fit(features, labels, &fit, beta, sigma0_sq)?;
    Ok((result.metric, result))
}
