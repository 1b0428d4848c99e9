//! Hyperparameter choice by agreement with LINEAR-VALID.

use crate::error::{Error, Result};
use crate::numerics::kendall_tau;

#[derive(Debug, Clone, PartialEq)]
pub struct HparamChoice {
    pub index: usize,
    /// τ of every candidate against the validation errors.
    pub taus: Vec<f64>,
    /// All candidates tied; the first one was returned.
    pub degenerate: bool,
}

/// Index of the candidate whose scores (losses, lower is better) rank the
/// checkpoints most like the LINEAR-VALID validation errors. Ties go to the
/// earliest candidate.
pub fn select_hparams_via_linear_valid(scores_by_hparam: &[Vec<f64>], linear_valid_errors: &[f64]) -> Result<HparamChoice> {
    if scores_by_hparam.is_empty() {
        return Err(Error::validation("no hyperparameter candidates"));
    }
    if scores_by_hparam.len() == 1 {
        let taus = if linear_valid_errors.len() >= 2 {
            vec![kendall_tau(&scores_by_hparam[0], linear_valid_errors)?]
        } else {
            vec![f64::NAN]
        };
        return Ok(HparamChoice {
            index: 0,
            taus,
            degenerate: false,
        });
    }
    if linear_valid_errors.len() < 2 {
        return Err(Error::validation("selection needs at least two checkpoints"));
    }
    let taus = scores_by_hparam
        .iter()
        .map(|s| kendall_tau(s, linear_valid_errors))
        .collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (j, &t) in taus.iter().enumerate() {
        if t > taus[index] {
            index = j;
        }
    }
    let degenerate = taus.iter().all(|&t| t == taus[0]);
    Ok(HparamChoice { index, taus, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate() {
        let c = select_hparams_via_linear_valid(&[vec![3.0, 1.0]], &[0.1, 0.2]).unwrap();
        assert_eq!(c.index, 0);
        assert!(!c.degenerate);
    }

    #[test]
    fn exact_match_wins() {
        let errors = vec![0.3, 0.1, 0.2, 0.5];
        let c = select_hparams_via_linear_valid(&[vec![4.0, 3.0, 2.0, 1.0], errors.clone(), vec![1.0; 4]], &errors).unwrap();
        assert_eq!(c.index, 1);
        assert_eq!(c.taus[1], 1.0);
    }

    #[test]
    fn all_ties_take_first_and_flag() {
        let c = select_hparams_via_linear_valid(&[vec![1.0, 2.0], vec![5.0, 6.0]], &[0.1, 0.2]).unwrap();
        assert_eq!(c.index, 0);
        assert!(c.degenerate);
    }
}
