//! Reference log-evidences for certifying the variational bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::Serialize;

use super::check_prior;
use crate::data::SourceDistribution;
use crate::error::{Error, Result};
use crate::numerics::reduce::lse;
use crate::numerics::softmax_reg::check_labels;
use crate::numerics::special::ln_gamma_pos;
use crate::Matrix;

const MAX_CONFIGURATIONS: f64 = 1e6;

fn log_c(column: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut lg) = (0.0, 0.0);
    for a in column {
        sum += a;
        lg += ln_gamma_pos(a);
    }
    ln_gamma_pos(sum) - lg
}

/// Exact `log Z(S)` of the Dirichlet model by enumerating every
/// assignment of examples to source classes.
pub fn exact_log_evidence_dirichlet(
    probs: &SourceDistribution,
    labels: &[usize],
    num_classes: usize,
    alpha_prior: &[f64],
) -> Result<f64> {
    let n = probs.len();
    let z = probs.num_source_classes();
    check_labels(labels, num_classes, n)?;
    check_prior(alpha_prior, num_classes)?;
    let size = (z as f64).powi(n as i32);
    if size > MAX_CONFIGURATIONS {
        return Err(Error::validation(format!(
            "enumeration needs |Z|^N = {size:.3e} configurations, above the limit of {MAX_CONFIGURATIONS:.0e}"
        )));
    }
    let log_m = probs.probs.map(f64::ln);
    let log_c_prior = log_c(alpha_prior.iter().copied());
    let counts_log_c = |counts: &Matrix| -> f64 {
        (0..z)
            .map(|c| log_c_prior - log_c((0..num_classes).map(|y| alpha_prior[y] + counts[(y, c)])))
            .sum()
    };

    if z == 1 {
        let mut counts = Matrix::zeros(num_classes, 1);
        for &y in labels {
            counts[(y, 0)] += 1.0;
        }
        return Ok(log_m.column(0).sum() + counts_log_c(&counts));
    }

    let mut assignment = vec![0usize; n];
    let mut terms = Vec::with_capacity(size as usize);
    loop {
        let mut counts = Matrix::zeros(num_classes, z);
        let mut lm = 0.0;
        for (i, (&c, &y)) in assignment.iter().zip(labels).enumerate() {
            counts[(y, c)] += 1.0;
            lm += log_m[(i, c)];
        }
        if lm > f64::NEG_INFINITY {
            terms.push(lm + counts_log_c(&counts));
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(if terms.is_empty() { f64::NEG_INFINITY } else { lse(&terms) });
            }
            assignment[pos] += 1;
            if assignment[pos] < z {
                break;
            }
            assignment[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEvidence {
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub standard_error: f64,
    /// Every draw had zero likelihood.
    pub degenerate: bool,
}

/// Monte-Carlo `log Z(S)` for the Gamma model, sampling `V` from its prior
/// with unit scale and evaluating the normalized likelihood exactly.
pub fn mc_log_evidence_gamma(
    probs: &SourceDistribution,
    labels: &[usize],
    num_classes: usize,
    a_prior: &[f64],
    num_samples: usize,
    seed: u64,
) -> Result<McEvidence> {
    mc_log_evidence_gamma_with_rate(probs, labels, num_classes, a_prior, num_samples, seed, 1.0)
}

/// As [`mc_log_evidence_gamma`] with prior `Gamma(a_y, rate)`.
pub fn mc_log_evidence_gamma_with_rate(
    probs: &SourceDistribution,
    labels: &[usize],
    num_classes: usize,
    a_prior: &[f64],
    num_samples: usize,
    seed: u64,
    rate: f64,
) -> Result<McEvidence> {
    let n = probs.len();
    let z = probs.num_source_classes();
    check_labels(labels, num_classes, n)?;
    check_prior(a_prior, num_classes)?;
    if num_samples < 1000 {
        return Err(Error::validation(format!("num_samples must be at least 1000, got {num_samples}")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::validation(format!("rate must be positive, got {rate}")));
    }
    let dists = a_prior
        .iter()
        .map(|&a| Gamma::new(a, 1.0 / rate).map_err(|e| Error::validation(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Matrix::zeros(num_classes, z);
    let mut log_w = Vec::with_capacity(num_samples);
    for _ in 0..num_samples {
        for c in 0..z {
            for (y, dist) in dists.iter().enumerate() {
                v[(y, c)] = dist.sample(&mut rng);
            }
        }
        let col_sums: Vec<f64> = v.column_iter().map(|col| col.sum()).collect();
        let mut lw = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let (mut num, mut den) = (0.0, 0.0);
            for c in 0..z {
                let m = probs.probs[(i, c)];
                num += m * v[(y, c)];
                den += m * col_sums[c];
            }
            lw += num.ln() - den.ln();
        }
        log_w.push(if lw.is_nan() { f64::NEG_INFINITY } else { lw });
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(McEvidence {
            estimate: f64::NEG_INFINITY,
            standard_error: f64::INFINITY,
            degenerate: true,
        });
    }
    let count = num_samples as f64;
    let scaled: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / count;
    let var = scaled.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(McEvidence {
        estimate: max + mean.ln(),
        standard_error: (var / count).sqrt() / mean,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_example_uniform_rows() {
        let probs = SourceDistribution::new(Matrix::from_element(1, 2, 0.5)).unwrap();
        for y in 0..2 {
            let v = exact_log_evidence_dirichlet(&probs, &[y], 2, &[0.5, 0.5]).unwrap();
            assert!((v - 0.5f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_limit() {
        let probs = SourceDistribution::new(Matrix::from_element(21, 2, 0.5)).unwrap();
        let labels = vec![0; 21];
        let err = exact_log_evidence_dirichlet(&probs, &labels, 1, &[1.0]).unwrap_err();
        assert!(err.to_string().contains("2.097e6"), "{err}");
    }

    #[test]
    fn single_class_mc_is_exact() {
        let probs = SourceDistribution::new(Matrix::from_row_slice(3, 2, &[0.2, 0.8, 0.5, 0.5, 1.0, 0.0])).unwrap();
        let r = mc_log_evidence_gamma(&probs, &[0, 0, 0], 1, &[0.7], 1000, 3).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.standard_error, 0.0);
    }

    #[test]
    fn too_few_samples() {
        let probs = SourceDistribution::new(Matrix::from_element(1, 1, 1.0)).unwrap();
        assert!(mc_log_evidence_gamma(&probs, &[0], 1, &[1.0], 999, 0).is_err());
    }
}
