//! LEEP, NCE and N-LEEP.

use crate::data::{FeatureSet, SourceDistribution};
use crate::error::{Error, Result};
use crate::numerics::reduce::lse;
use crate::numerics::softmax_reg::check_labels;
use crate::numerics::{gmm_fit_with, gmm_posterior, pca_fit, GmmConfig};
use crate::Matrix;

/// Empirical conditional `p̂(y|z)`, stored `K×|Z|`.
#[derive(Debug, Clone)]
pub struct LeepConditional {
    pub conditional: Matrix,
    /// Source classes with no mass; their columns were set to uniform.
    pub empty_columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct LeepScore {
    pub score: f64,
    /// Some example had zero predicted probability for its label.
    pub degenerate: bool,
}

pub fn leep_conditional(probs: &SourceDistribution, labels: &[usize], num_classes: usize) -> Result<LeepConditional> {
    probs.require_normalized()?;
    let n = probs.len();
    if n == 0 {
        return Err(Error::validation("LEEP needs at least one example"));
    }
    check_labels(labels, num_classes, n)?;
    let z = probs.num_source_classes();
    let mut joint = Matrix::zeros(num_classes, z);
    for (i, &y) in labels.iter().enumerate() {
        for c in 0..z {
            joint[(y, c)] += probs.probs[(i, c)];
        }
    }
    joint /= n as f64;
    let mut empty_columns = Vec::new();
    for c in 0..z {
        let marginal: f64 = joint.column(c).sum();
        if marginal > 0.0 {
            joint.column_mut(c).scale_mut(1.0 / marginal);
        } else {
            joint.column_mut(c).fill(1.0 / num_classes as f64);
            empty_columns.push(c);
        }
    }
    Ok(LeepConditional {
        conditional: joint,
        empty_columns,
    })
}

/// `(1/N) Σ_i log Σ_z p̂(y_i|z) M(x_i)_z`.
pub fn leep_score(probs: &SourceDistribution, labels: &[usize], num_classes: usize) -> Result<LeepScore> {
    let cond = leep_conditional(probs, labels, num_classes)?.conditional;
    let z = probs.num_source_classes();
    let mut terms = vec![0.0; z];
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        for (c, t) in terms.iter_mut().enumerate() {
            *t = cond[(y, c)].ln() + probs.probs[(i, c)].ln();
        }
        total += lse(&terms);
    }
    let score = total / labels.len() as f64;
    Ok(LeepScore {
        score,
        degenerate: score == f64::NEG_INFINITY,
    })
}

/// Negative conditional entropy `−H(Y|Z)` with `z_i = argmax_z M(x_i)_z`.
pub fn nce_score(probs: &SourceDistribution, labels: &[usize], num_classes: usize) -> Result<f64> {
    probs.require_normalized()?;
    let n = probs.len();
    if n == 0 {
        return Err(Error::validation("NCE needs at least one example"));
    }
    check_labels(labels, num_classes, n)?;
    let z = probs.num_source_classes();
    let mut joint = Matrix::zeros(z, num_classes);
    for (i, &y) in labels.iter().enumerate() {
        let row = probs.probs.row(i);
        let mut best = 0;
        for c in 1..z {
            if row[c] > row[best] {
                best = c;
            }
        }
        joint[(best, y)] += 1.0;
    }
    let mut total = 0.0;
    for c in 0..z {
        let marginal: f64 = joint.row(c).sum();
        for y in 0..num_classes {
            let count = joint[(c, y)];
            if count > 0.0 {
                total += count * (count / marginal).ln();
            }
        }
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone)]
pub struct NleepScore {
    pub score: f64,
    pub pca_dim: usize,
    pub gmm_log_likelihood: f64,
    pub gmm_converged: bool,
    pub degenerate: bool,
}

/// LEEP with GMM cluster posteriors on PCA-reduced features in place of
/// source-head outputs.
pub fn nleep_score(
    data: &FeatureSet,
    energy_fraction: f64,
    num_components: usize,
    seed: u64,
    gmm: &GmmConfig,
) -> Result<NleepScore> {
    let pca = pca_fit(&data.features, energy_fraction)?;
    let reduced = pca.transform(&data.features)?;
    let model = gmm_fit_with(&reduced, num_components, seed, gmm)?;
    let posterior = gmm_posterior(&model, &reduced)?;
    // Rows are normalized in log space; fix the last ulp so the
    // normalization check cannot trip.
    let mut probs = posterior;
    for mut row in probs.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    let source = SourceDistribution::new(probs)?;
    let leep = leep_score(&source, &data.labels, data.num_classes)?;
    Ok(NleepScore {
        score: leep.score,
        pca_dim: pca.dim(),
        gmm_log_likelihood: model.log_likelihood,
        gmm_converged: model.converged,
        degenerate: leep.degenerate || pca.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::LN_2;

    fn source(m: Matrix) -> SourceDistribution {
        SourceDistribution::new(m).unwrap()
    }

    fn random_probs(rng: &mut ChaCha8Rng, n: usize, z: usize) -> Matrix {
        let mut m = Matrix::from_fn(n, z, |_, _| rng.random::<f64>() + 0.01);
        for mut r in m.row_iter_mut() {
            let s = r.sum();
            r /= s;
        }
        m
    }

    #[test]
    fn aligned_one_hot() {
        let m = source(Matrix::identity(2, 2));
        let cond = leep_conditional(&m, &[0, 1], 2).unwrap();
        assert_eq!(cond.conditional, Matrix::identity(2, 2));
        assert_eq!(leep_score(&m, &[0, 1], 2).unwrap().score, 0.0);
    }

    #[test]
    fn uniform_rows_give_label_frequencies() {
        let m = source(Matrix::from_element(4, 3, 1.0 / 3.0));
        let labels = [0, 1, 0, 1];
        let cond = leep_conditional(&m, &labels, 2).unwrap();
        assert!(cond.conditional.iter().all(|v| (v - 0.5).abs() < 1e-15));
        assert!((leep_score(&m, &labels, 2).unwrap().score + LN_2).abs() < 1e-12);
    }

    #[test]
    fn direct_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_probs(&mut rng, 10, 4);
        let labels: Vec<usize> = (0..10).map(|_| rng.random_range(0..3)).collect();
        // Direct evaluation of the joint, conditional and marginal likelihood.
        let mut joint = [[0.0f64; 4]; 3];
        for i in 0..10 {
            for z in 0..4 {
                joint[labels[i]][z] += m[(i, z)] / 10.0;
            }
        }
        let mut expected = 0.0;
        for i in 0..10 {
            let mut p = 0.0;
            for z in 0..4 {
                let col: f64 = (0..3).map(|y| joint[y][z]).sum();
                p += joint[labels[i]][z] / col * m[(i, z)];
            }
            expected += p.ln() / 10.0;
        }
        let got = leep_score(&source(m), &labels, 3).unwrap().score;
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_source_column_is_uniform() {
        let m = source(Matrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        let cond = leep_conditional(&m, &[0, 1], 2).unwrap();
        assert_eq!(cond.empty_columns, vec![2]);
        assert_eq!(cond.conditional[(0, 2)], 0.5);
    }

    #[test]
    fn unnormalized_rejected() {
        let m = source(Matrix::from_element(2, 2, 1.0));
        assert!(leep_score(&m, &[0, 1], 2).is_err());
    }

    #[test]
    fn nce_fixtures() {
        let m = source(Matrix::from_row_slice(4, 2, &[0.9, 0.1, 0.2, 0.8, 0.7, 0.3, 0.4, 0.6]));
        assert_eq!(nce_score(&m, &[0, 1, 0, 1], 2).unwrap(), 0.0);
        let m = source(Matrix::from_row_slice(4, 2, &[0.9, 0.1, 0.9, 0.1, 0.2, 0.8, 0.2, 0.8]));
        assert!((nce_score(&m, &[0, 1, 0, 1], 2).unwrap() + LN_2).abs() < 1e-12);
    }

    #[test]
    fn leep_bounds_nce_for_one_hot_sources() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(2..30);
            let z = rng.random_range(1..5);
            let m = Matrix::from_fn(n, z, |_, _| 0.0);
            let mut m = m;
            for i in 0..n {
                m[(i, rng.random_range(0..z))] = 1.0;
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let s = source(m);
            assert!(leep_score(&s, &labels, 3).unwrap().score >= nce_score(&s, &labels, 3).unwrap() - 1e-12);
        }
    }

    #[test]
    fn leep_invariant_to_source_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_probs(&mut rng, 12, 5);
        let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let perm = [3, 0, 4, 1, 2];
        let permuted = Matrix::from_fn(12, 5, |i, j| m[(i, perm[j])]);
        let a = leep_score(&source(m), &labels, 3).unwrap().score;
        let b = leep_score(&source(permuted), &labels, 3).unwrap().score;
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn nce_invariant_to_argmax_preserving_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_probs(&mut rng, 15, 4);
        let labels: Vec<usize> = (0..15).map(|i| i % 2).collect();
        let mut t = m.map(|v| v.powi(3));
        for mut r in t.row_iter_mut() {
            let s = r.sum();
            r /= s;
        }
        assert_eq!(
            nce_score(&source(m), &labels, 2).unwrap(),
            nce_score(&source(t), &labels, 2).unwrap()
        );
    }

    #[test]
    fn nleep_pure_clusters_score_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = 3;
        let labels: Vec<usize> = (0..60).map(|i| i % k).collect();
        let x = Matrix::from_fn(60, 4, |i, j| {
            let center = if j == labels[i] { 20.0 } else { 0.0 };
            center + Distribution::<f64>::sample(&StandardNormal, &mut rng) * 0.5
        });
        let data = FeatureSet::new(x, labels, k).unwrap();
        let s = nleep_score(&data, 0.8, k, 1, &GmmConfig::default()).unwrap();
        assert!(s.score >= -0.01, "{}", s.score);
        let again = nleep_score(&data, 0.8, k, 1, &GmmConfig::default()).unwrap();
        assert_eq!(s.score, again.score);
    }

    #[test]
    fn nleep_uninformative_features_score_near_label_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let labels: Vec<usize> = (0..400).map(|i| i % 2).collect();
        let x = Matrix::from_fn(400, 3, |_, _| StandardNormal.sample(&mut rng));
        let data = FeatureSet::new(x, labels, 2).unwrap();
        let s = nleep_score(&data, 0.8, 2, 3, &GmmConfig::default()).unwrap();
        assert!((s.score + LN_2).abs() < 0.1, "{}", s.score);
    }
}
