//! H-score, LogME, LINEAR and LINEAR-VALID.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::numerics::{fit_l2_softmax, predict, SoftmaxFit};
use crate::Matrix;

fn centered_covariance(x: &Matrix) -> Matrix {
    let n = x.nrows() as f64;
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    centered.tr_mul(&centered) / n
}

/// `trace(pinv(cov f) · cov_b)` with a pseudo-inverse that drops
/// eigenvalues below `1e-10 · λ_max`.
pub fn h_score(data: &FeatureSet) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::validation("H-score needs at least two examples"));
    }
    let counts = data.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::validation(format!("class {k} is absent; H-score needs every class")));
    }
    let d = data.dim();
    let cov = centered_covariance(&data.features);
    let mean = data.features.row_mean();

    let mut class_means = Matrix::zeros(data.num_classes, d);
    for (i, &y) in data.labels.iter().enumerate() {
        let mut row = class_means.row_mut(y);
        row += data.features.row(i);
    }
    let mut cov_b = Matrix::zeros(d, d);
    for (k, &c) in counts.iter().enumerate() {
        let diff = (class_means.row(k) / c as f64 - &mean).transpose();
        cov_b += (&diff * diff.transpose()) * (c as f64 / n as f64);
    }

    let eig = cov.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return Ok(0.0);
    }
    let threshold = 1e-10 * lmax;
    let mut h = 0.0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > threshold {
            let v = eig.eigenvectors.column(j);
            h += v.dot(&(&cov_b * v)) / lambda;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy)]
pub struct LogmeConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for LogmeConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

/// Per-class fixed-point results; index `k` is the one-hot column for class `k`.
#[derive(Debug, Clone, Serialize)]
pub struct LogmeState {
    pub alpha: Vec<f64>,
    pub beta_noise: Vec<f64>,
    /// Per-sample log-evidence per class.
    pub evidence: Vec<f64>,
    pub evidence_traces: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
    pub converged: bool,
}

/// Spectral quantities shared by every target column.
struct Spectrum {
    /// Squared singular values padded with zeros to length `D`.
    sigma_sq: Vec<f64>,
    u: Matrix,
    n: usize,
}

impl Spectrum {
    fn new(features: &Matrix) -> Self {
        let (n, d) = features.shape();
        let svd = features.clone().svd(true, false);
        let mut sigma_sq: Vec<f64> = svd.singular_values.iter().map(|s| s * s).collect();
        sigma_sq.resize(d, 0.0);
        Self {
            sigma_sq,
            u: svd.u.expect("requested U"),
            n,
        }
    }

    fn project(&self, y: &[f64]) -> (Vec<f64>, f64) {
        let yv = nalgebra::DVector::from_column_slice(y);
        let p = self.u.tr_mul(&yv);
        let in_span: f64 = p.iter().map(|v| v * v).sum();
        let rest = (yv.norm_squared() - in_span).max(0.0);
        (p.iter().copied().collect(), rest)
    }

    /// `‖m‖²` and `‖y − F m‖²` for the posterior mean `m`.
    fn posterior_terms(&self, proj: &(Vec<f64>, f64), alpha: f64, beta: f64) -> (f64, f64) {
        let (p, rest) = proj;
        let mut m_sq = 0.0;
        let mut res = *rest;
        for (j, &pj) in p.iter().enumerate() {
            let s2 = self.sigma_sq[j];
            let mj = beta * s2.sqrt() * pj / (alpha + beta * s2);
            m_sq += mj * mj;
            let r = pj - s2.sqrt() * mj;
            res += r * r;
        }
        (m_sq, res)
    }

    fn evidence_from(&self, alpha: f64, beta: f64, m_sq: f64, res: f64) -> f64 {
        let n = self.n as f64;
        let d = self.sigma_sq.len() as f64;
        let logdet: f64 = self.sigma_sq.iter().map(|s2| (alpha + beta * s2).ln()).sum();
        0.5 * d * alpha.ln() + 0.5 * n * beta.ln() - 0.5 * beta * res - 0.5 * alpha * m_sq - 0.5 * logdet
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    fn maximize(&self, y: &[f64], config: &LogmeConfig) -> (f64, f64, Vec<f64>, usize, bool) {
        let proj = self.project(y);
        let n = self.n as f64;
        let (mut alpha, mut beta) = (1.0f64, 1.0f64);
        let mut trace = Vec::new();
        for it in 1..=config.max_iterations {
            let (m_sq, res) = self.posterior_terms(&proj, alpha, beta);
            trace.push(self.evidence_from(alpha, beta, m_sq, res));
            let gamma: f64 = self.sigma_sq.iter().map(|s2| beta * s2 / (alpha + beta * s2)).sum();
            let new_alpha = (gamma / m_sq).clamp(1e-12, 1e12);
            let new_beta = ((n - gamma) / res).clamp(1e-12, 1e12);
            let done = ((new_alpha - alpha) / alpha).abs() < config.tolerance
                && ((new_beta - beta) / beta).abs() < config.tolerance;
            alpha = if new_alpha.is_finite() { new_alpha } else { 1e12 };
            beta = if new_beta.is_finite() { new_beta } else { 1e12 };
            if done {
                let (m_sq, res) = self.posterior_terms(&proj, alpha, beta);
                trace.push(self.evidence_from(alpha, beta, m_sq, res));
                return (alpha, beta, trace, it, true);
            }
        }
        let (m_sq, res) = self.posterior_terms(&proj, alpha, beta);
        trace.push(self.evidence_from(alpha, beta, m_sq, res));
        (alpha, beta, trace, config.max_iterations, false)
    }
}

pub fn logme_score(data: &FeatureSet) -> Result<(f64, LogmeState)> {
    logme_score_with(data, &LogmeConfig::default())
}

/// Mean over one-hot class targets of the per-sample maximized log-evidence
/// of Bayesian linear regression without intercept.
pub fn logme_score_with(data: &FeatureSet, config: &LogmeConfig) -> Result<(f64, LogmeState)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::validation("LogME needs at least two examples"));
    }
    let spectrum = Spectrum::new(&data.features);
    let mut state = LogmeState {
        alpha: Vec::new(),
        beta_noise: Vec::new(),
        evidence: Vec::new(),
        evidence_traces: Vec::new(),
        iterations: Vec::new(),
        converged: true,
    };
    for k in 0..data.num_classes {
        let y: Vec<f64> = data.labels.iter().map(|&l| f64::from(u8::from(l == k))).collect();
        let (alpha, beta, trace, iterations, converged) = spectrum.maximize(&y, config);
        let evidence = *trace.last().expect("non-empty trace") / n as f64;
        if !evidence.is_finite() {
            return Err(Error::Numerical {
                message: format!("LogME evidence for class {k} is not finite"),
                point: vec![alpha, beta],
            });
        }
        state.alpha.push(alpha);
        state.beta_noise.push(beta);
        state.evidence.push(evidence);
        state.evidence_traces.push(trace);
        state.iterations.push(iterations);
        state.converged &= converged;
    }
    let score = state.evidence.iter().sum::<f64>() / data.num_classes as f64;
    Ok((score, state))
}

/// Regularized training loss `L̂(θ*) + ‖θ*‖²/(2β)`.
pub fn linear_metric(data: &FeatureSet, beta: f64) -> Result<(f64, SoftmaxFit)> {
    let fit = fit_l2_softmax(&data.features, &data.labels, data.num_classes, beta)?;
    Ok((fit.loss, fit))
}

#[derive(Debug, Clone, Serialize)]
pub struct LinearValidResult {
    pub validation_error: f64,
    pub chosen_beta: f64,
    pub errors_per_beta: Vec<f64>,
    pub fits_performed: usize,
    /// Classes that ended up entirely in one fold.
    pub unsplit_classes: Vec<usize>,
}

/// Stratified half split: fold 0 trains, fold 1 validates.
pub(crate) fn stratified_halves(labels: &[usize], num_classes: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let (mut train, mut valid, mut unsplit) = (Vec::new(), Vec::new(), Vec::new());
    let mut counter = 0usize;
    for (k, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        if members.len() == 1 {
            unsplit.push(k);
        }
        for &i in members.iter() {
            if counter % 2 == 0 {
                train.push(i);
            } else {
                valid.push(i);
            }
            counter += 1;
        }
    }
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid, unsplit)
}

/// Minimum held-out 0-1 error over `beta_grid`, ties to the smaller β.
pub fn linear_valid_metric(data: &FeatureSet, beta_grid: &[f64], seed: u64) -> Result<LinearValidResult> {
    if data.len() < 2 {
        return Err(Error::validation("LINEAR-VALID needs at least two examples"));
    }
    if beta_grid.is_empty() {
        return Err(Error::validation("LINEAR-VALID needs a non-empty beta grid"));
    }
    let (train, valid, unsplit) = stratified_halves(&data.labels, data.num_classes, seed);
    let a = data.subset(&train);
    let b = data.subset(&valid);
    let mut grid: Vec<f64> = beta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let mut errors = Vec::with_capacity(grid.len());
    for &beta in &grid {
        let fit = fit_l2_softmax(&a.features, &a.labels, data.num_classes, beta)?;
        let predicted = predict(&b.features, &fit.theta);
        let wrong = predicted.iter().zip(&b.labels).filter(|(p, y)| p != y).count();
        errors.push(wrong as f64 / b.len() as f64);
    }
    let mut best = 0;
    for (j, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = j;
        }
    }
    Ok(LinearValidResult {
        validation_error: errors[best],
        chosen_beta: grid[best],
        fits_performed: errors.len(),
        errors_per_beta: errors,
        unsplit_classes: unsplit,
    })
}
