//! PACTran metrics: Dirichlet and Gamma variational bounds on source-head
//! outputs, and the Gaussian flatness-regularized bound on features.
//! All three are losses, so lower means more transferable.

use crate::error::{Error, Result};
use crate::numerics::special::{digamma_pos, ln_gamma_pos};

mod dirichlet;
mod gamma;
mod gaussian;
mod oracle;

pub use dirichlet::{pactran_dirichlet, DirichletState};
pub use gamma::{pactran_gamma, GammaState};
pub use gaussian::{pactran_gaussian, pactran_gaussian_from_fit, trace_hessian_ce, GaussResult};
pub use oracle::{exact_log_evidence_dirichlet, mc_log_evidence_gamma, mc_log_evidence_gamma_with_rate, McEvidence};

const ARG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct VariationalConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            tolerance: 1e-6,
        }
    }
}

/// Class prior `max(p̂(y), 1/(10N))`.
pub fn default_prior(labels: &[usize], num_classes: usize) -> Vec<f64> {
    let n = labels.len().max(1) as f64;
    let mut counts = vec![0.0; num_classes];
    for &y in labels {
        if y < num_classes {
            counts[y] += 1.0;
        }
    }
    counts.iter().map(|c| (c / n).max(1.0 / (10.0 * n))).collect()
}

pub(crate) fn check_prior(prior: &[f64], num_classes: usize) -> Result<()> {
    if prior.len() != num_classes {
        return Err(Error::validation(format!("prior has {} entries, expected K = {num_classes}", prior.len())));
    }
    if let Some((k, a)) = prior.iter().enumerate().find(|(_, a)| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::validation(format!("prior entry {k} is {a}; it must be positive and finite")));
    }
    Ok(())
}

/// Special-function evaluation with arguments clamped at `1e-12`.
#[derive(Debug, Default)]
pub(crate) struct Clamped {
    pub hit: bool,
}

impl Clamped {
    fn arg(&mut self, x: f64) -> f64 {
        if x < ARG_FLOOR {
            self.hit = true;
            ARG_FLOOR
        } else {
            x
        }
    }

    pub fn ln_gamma(&mut self, x: f64) -> f64 {
        ln_gamma_pos(self.arg(x))
    }

    pub fn digamma(&mut self, x: f64) -> f64 {
        digamma_pos(self.arg(x))
    }
}

/// `Σ q (log q − log M)` with `0 log 0 = 0`.
pub(crate) fn assignment_entropy_term(q: &crate::Matrix, log_m: &crate::Matrix) -> f64 {
    let mut total = 0.0;
    for (qv, lm) in q.iter().zip(log_m.iter()) {
        if *qv > 0.0 {
            total += qv * (qv.ln() - lm);
        }
    }
    total
}

/// Row-normalized copy of `M` and its elementwise log.
pub(crate) fn initial_assignment(probs: &crate::Matrix) -> Result<(crate::Matrix, crate::Matrix)> {
    let mut q = probs.clone();
    for (i, mut row) in q.row_iter_mut().enumerate() {
        let s = row.sum();
        if !(s > 0.0) {
            return Err(Error::validation(format!("source probability row {i} sums to zero")));
        }
        row /= s;
    }
    Ok((q, probs.map(f64::ln)))
}

/// `q_iz ∝ exp(log M_iz + logits(y_i, z))`, normalized in log space.
pub(crate) fn update_assignment(
    q: &mut crate::Matrix,
    log_m: &crate::Matrix,
    labels: &[usize],
    logits: &crate::Matrix,
) {
    let z = q.ncols();
    let mut buf = vec![0.0; z];
    for (i, &y) in labels.iter().enumerate() {
        for (c, b) in buf.iter_mut().enumerate() {
            *b = log_m[(i, c)] + logits[(y, c)];
        }
        let norm = crate::numerics::reduce::lse(&buf);
        for (c, b) in buf.iter().enumerate() {
            q[(i, c)] = (b - norm).exp();
        }
    }
}

/// `α_y + Σ_i q_iz δ(y_i = y)` as a `K×|Z|` matrix.
pub(crate) fn posterior_counts(q: &crate::Matrix, labels: &[usize], prior: &[f64]) -> crate::Matrix {
    let z = q.ncols();
    let mut out = crate::Matrix::from_fn(prior.len(), z, |y, _| prior[y]);
    for (i, &y) in labels.iter().enumerate() {
        for c in 0..z {
            out[(y, c)] += q[(i, c)];
        }
    }
    out
}
