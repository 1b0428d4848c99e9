use serde::Serialize;

use super::{
    assignment_entropy_term, check_prior, initial_assignment, posterior_counts, update_assignment, Clamped,
    VariationalConfig,
};
use crate::data::SourceDistribution;
use crate::error::{Error, Result};
use crate::numerics::softmax_reg::check_labels;
use crate::Matrix;

#[derive(Debug, Clone, Serialize)]
pub struct GammaState {
    #[serde(skip)]
    pub q: Matrix,
    #[serde(skip)]
    pub a_tilde: Matrix,
    pub a_prior: Vec<f64>,
    /// Gamma scale; always 1.
    pub b: f64,
    pub lambda_tilde: Vec<f64>,
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A sweep would have lowered the bound and was discarded.
    pub descent_rejected: bool,
    pub clamped: bool,
}

/// `λ̃_i = Σ_z M_iz Σ_y ã_yz`.
fn lambda_tilde(probs: &Matrix, a_tilde: &Matrix) -> Vec<f64> {
    let col_sums: Vec<f64> = a_tilde.column_iter().map(|c| c.sum()).collect();
    probs
        .row_iter()
        .map(|row| row.iter().zip(&col_sums).map(|(m, s)| m * s).sum())
        .collect()
}

fn negative_elbo(q: &Matrix, log_m: &Matrix, a_tilde: &Matrix, lambda: &[f64], prior: &[f64], sf: &mut Clamped) -> f64 {
    let mut total = 0.0;
    for c in 0..a_tilde.ncols() {
        for (y, &a) in prior.iter().enumerate() {
            total += sf.ln_gamma(a) - sf.ln_gamma(a_tilde[(y, c)]);
        }
    }
    total += lambda.iter().map(|l| l.ln()).sum::<f64>();
    total + assignment_entropy_term(q, log_m)
}

/// Negated ELBO of the Gamma-prior model with exponential augmentation.
/// Rows of `probs` need not be normalized.
pub fn pactran_gamma(
    probs: &SourceDistribution,
    labels: &[usize],
    num_classes: usize,
    a_prior: Option<&[f64]>,
    config: &VariationalConfig,
) -> Result<(f64, GammaState)> {
    let n = probs.len();
    if n == 0 {
        return Err(Error::validation("PT-Gamma needs at least one example"));
    }
    check_labels(labels, num_classes, n)?;
    let prior = match a_prior {
        Some(p) => p.to_vec(),
        None => super::default_prior(labels, num_classes),
    };
    check_prior(&prior, num_classes)?;

    let mut sf = Clamped::default();
    let (mut q, log_m) = initial_assignment(&probs.probs)?;
    let mut a_tilde = posterior_counts(&q, labels, &prior);
    let mut lambda = lambda_tilde(&probs.probs, &a_tilde);
    let mut elbo_trace = vec![-negative_elbo(&q, &log_m, &a_tilde, &lambda, &prior, &mut sf)];
    let mut iterations = 0;
    let mut converged = false;
    let mut descent_rejected = false;
    while iterations < config.max_iterations {
        iterations += 1;
        let logits = a_tilde.map(|a| sf.digamma(a));
        let mut q_next = q.clone();
        update_assignment(&mut q_next, &log_m, labels, &logits);
        let a_next = posterior_counts(&q_next, labels, &prior);
        let lambda_next = lambda_tilde(&probs.probs, &a_next);
        let elbo = -negative_elbo(&q_next, &log_m, &a_next, &lambda_next, &prior, &mut sf);
        let gain = elbo - elbo_trace[elbo_trace.len() - 1];
        // A sweep that lowers the bound is discarded.
        if gain < 0.0 {
            descent_rejected = true;
            converged = true;
            break;
        }
        q = q_next;
        a_tilde = a_next;
        lambda = lambda_next;
        elbo_trace.push(elbo);
        if gain < config.tolerance {
            converged = true;
            break;
        }
    }
    let score = -elbo_trace[elbo_trace.len() - 1];
    Ok((
        score,
        GammaState {
            q,
            a_tilde,
            a_prior: prior,
            b: 1.0,
            lambda_tilde: lambda,
            elbo_trace,
            iterations,
            converged,
            descent_rejected,
            clamped: sf.hit,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_source_class_closed_form() {
        let probs = SourceDistribution::new(Matrix::from_element(2, 1, 1.0)).unwrap();
        let (score, state) =
            pactran_gamma(&probs, &[0, 1], 2, Some(&[0.5, 0.5]), &VariationalConfig::default()).unwrap();
        let expected = 2.0 * 2f64.ln() + 2.0 * 3f64.ln();
        assert!((score - expected).abs() < 1e-12, "{score}");
        assert_eq!(state.lambda_tilde, vec![3.0, 3.0]);
    }

    #[test]
    fn zero_row_is_rejected() {
        let probs = SourceDistribution::new(Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 2.0])).unwrap();
        assert!(pactran_gamma(&probs, &[0, 1], 2, None, &VariationalConfig::default()).is_err());
    }

    #[test]
    fn unnormalized_rows_are_accepted() {
        let probs = SourceDistribution::new(Matrix::from_row_slice(2, 2, &[3.0, 1.0, 0.5, 2.0])).unwrap();
        let (score, state) = pactran_gamma(&probs, &[0, 1], 2, None, &VariationalConfig::default()).unwrap();
        assert!(score.is_finite());
        for row in state.q.row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }
}
