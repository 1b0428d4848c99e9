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
pub struct DirichletState {
    #[serde(skip)]
    pub q: Matrix,
    #[serde(skip)]
    pub alpha_tilde: Matrix,
    pub alpha_prior: Vec<f64>,
    /// ELBO after initialization and after each sweep.
    pub elbo_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub clamped: bool,
}

fn negative_elbo(q: &Matrix, log_m: &Matrix, alpha_tilde: &Matrix, prior: &[f64], sf: &mut Clamped) -> f64 {
    let prior_sum: f64 = prior.iter().sum();
    let log_c_prior = sf.ln_gamma(prior_sum) - prior.iter().map(|&a| sf.ln_gamma(a)).sum::<f64>();
    let mut total = 0.0;
    for col in alpha_tilde.column_iter() {
        let log_c = sf.ln_gamma(col.sum()) - col.iter().map(|&a| sf.ln_gamma(a)).sum::<f64>();
        total += log_c - log_c_prior;
    }
    total + assignment_entropy_term(q, log_m)
}

/// Negated optimal ELBO of the Dirichlet-prior model over the top layer.
/// `alpha_prior` defaults to [`super::default_prior`].
pub fn pactran_dirichlet(
    probs: &SourceDistribution,
    labels: &[usize],
    num_classes: usize,
    alpha_prior: Option<&[f64]>,
    config: &VariationalConfig,
) -> Result<(f64, DirichletState)> {
    probs.require_normalized()?;
    let n = probs.len();
    if n == 0 {
        return Err(Error::validation("PT-Dirichlet needs at least one example"));
    }
    check_labels(labels, num_classes, n)?;
    let prior = match alpha_prior {
        Some(p) => p.to_vec(),
        None => super::default_prior(labels, num_classes),
    };
    check_prior(&prior, num_classes)?;

    let mut sf = Clamped::default();
    let (mut q, log_m) = initial_assignment(&probs.probs)?;
    let mut alpha_tilde = posterior_counts(&q, labels, &prior);
    let mut elbo_trace = vec![-negative_elbo(&q, &log_m, &alpha_tilde, &prior, &mut sf)];
    let mut iterations = 0;
    let mut converged = false;
    let z = q.ncols();
    while iterations < config.max_iterations {
        iterations += 1;
        let mut logits = Matrix::zeros(num_classes, z);
        for c in 0..z {
            let col_digamma = sf.digamma(alpha_tilde.column(c).sum());
            for y in 0..num_classes {
                logits[(y, c)] = sf.digamma(alpha_tilde[(y, c)]) - col_digamma;
            }
        }
        update_assignment(&mut q, &log_m, labels, &logits);
        alpha_tilde = posterior_counts(&q, labels, &prior);
        let elbo = -negative_elbo(&q, &log_m, &alpha_tilde, &prior, &mut sf);
        let gain = elbo - elbo_trace[elbo_trace.len() - 1];
        elbo_trace.push(elbo);
        if gain < config.tolerance {
            converged = true;
            break;
        }
    }
    let score = -elbo_trace[elbo_trace.len() - 1];
    Ok((
        score,
        DirichletState {
            q,
            alpha_tilde,
            alpha_prior: prior,
            elbo_trace,
            iterations,
            converged,
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
            pactran_dirichlet(&probs, &[0, 1], 2, Some(&[0.5, 0.5]), &VariationalConfig::default()).unwrap();
        assert!((score - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!(state.q.iter().all(|&v| v == 1.0));
        assert_eq!(state.alpha_tilde.as_slice(), &[1.5, 1.5]);
    }

    #[test]
    fn default_prior_floors_absent_classes() {
        let p = super::super::default_prior(&[0, 0, 1, 1], 3);
        assert_eq!(p, vec![0.5, 0.5, 1.0 / 40.0]);
    }

    #[test]
    fn non_positive_prior_is_rejected() {
        let probs = SourceDistribution::new(Matrix::from_element(2, 1, 1.0)).unwrap();
        assert!(pactran_dirichlet(&probs, &[0, 1], 2, Some(&[0.5, 0.0]), &VariationalConfig::default()).is_err());
    }
}
