mod common;

use common::*;
use pactran::data::FeatureSet;
use pactran::metrics::{
    default_prior, exact_log_evidence_dirichlet, leep_score, logme_score, mc_log_evidence_gamma,
    mc_log_evidence_gamma_with_rate, nce_score, pactran_dirichlet, pactran_gamma, pactran_gaussian, trace_hessian_ce,
    VariationalConfig,
};
use pactran::Matrix;
use proptest::prelude::*;
use rand::Rng;

/// `ln N(t | 0, F Fᵀ/α + I/β)` evaluated with a dense Cholesky factor.
fn marginal_log_likelihood(f: &Matrix, t: &[f64], alpha: f64, beta: f64) -> f64 {
    let n = f.nrows();
    let cov = f * f.transpose() / alpha + Matrix::identity(n, n) / beta;
    let chol = cov.cholesky().unwrap();
    let tv = nalgebra::DVector::from_column_slice(t);
    let quad = tv.dot(&chol.solve(&tv));
    let log_det: f64 = (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>() * 2.0;
    -0.5 * (quad + log_det + n as f64 * (2.0 * std::f64::consts::PI).ln())
}

fn log_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (steps - 1) as f64).exp())
        .collect()
}

fn grid_max(f: &Matrix, t: &[f64], alphas: &[f64], betas: &[f64]) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for &a in alphas {
        for &b in betas {
            let v = marginal_log_likelihood(f, t, a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    best
}

#[test]
fn logme_matches_log_grid_search_on_8x2() {
    let mut r = rng(20);
    let features = gaussian_matrix(&mut r, 8, 2);
    let labels = vec![0, 1, 0, 1, 1, 0, 0, 1];
    // The first coordinate carries the label.
    let features = Matrix::from_fn(8, 2, |i, j| features[(i, j)] * 0.3 + if j == 0 { labels[i] as f64 } else { 0.0 });
    let data = FeatureSet::new(features.clone(), labels.clone(), 2).unwrap();
    let (_, state) = logme_score(&data).unwrap();
    for k in 0..2 {
        let t: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == k))).collect();
        let (_, a0, b0) = grid_max(&features, &t, &log_grid(1e-6, 1e6, 200), &log_grid(1e-6, 1e6, 200));
        let (best, _, _) = grid_max(&features, &t, &log_grid(a0 / 1.2, a0 * 1.2, 200), &log_grid(b0 / 1.2, b0 * 1.2, 200));
        assert!((state.evidence[k] - best / 8.0).abs() < 1e-3, "class {k}: {} vs {}", state.evidence[k], best / 8.0);
    }
}

#[test]
fn logme_on_noise_features_matches_null_model() {
    let mut r = rng(21);
    let n = 4000;
    let features = gaussian_matrix(&mut r, n, 2);
    let labels = random_labels(&mut r, n, 2);
    let data = FeatureSet::new(features, labels.clone(), 2).unwrap();
    let (_, state) = logme_score(&data).unwrap();
    for k in 0..2 {
        let t_sq = labels.iter().filter(|&&l| l == k).count() as f64;
        let null = log_grid(1e-3, 1e3, 4001)
            .into_iter()
            .map(|b| 0.5 * n as f64 * b.ln() - 0.5 * b * t_sq - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln())
            .fold(f64::NEG_INFINITY, f64::max)
            / n as f64;
        assert!((state.evidence[k] - null).abs() < 1e-3, "class {k}: {} vs {null}", state.evidence[k]);
    }
}

#[test]
fn leep_matches_direct_evaluation_on_10x4() {
    let mut r = rng(22);
    let m = random_simplex_rows(&mut r, 10, 4);
    let labels = random_labels(&mut r, 10, 3);
    let mut joint = [[0.0; 4]; 3];
    for i in 0..10 {
        for z in 0..4 {
            joint[labels[i]][z] += m[(i, z)] / 10.0;
        }
    }
    let mut expected = 0.0;
    for i in 0..10 {
        let mut inner = 0.0;
        for z in 0..4 {
            let marginal: f64 = (0..3).map(|y| joint[y][z]).sum();
            inner += joint[labels[i]][z] / marginal * m[(i, z)];
        }
        expected += inner.ln() / 10.0;
    }
    let got = leep_score(&source(m), &labels, 3).unwrap().score;
    assert!((got - expected).abs() < 1e-12);
}

#[test]
fn dirichlet_bound_is_within_one_nat_on_n6() {
    let mut r = rng(23);
    let m = random_simplex_rows(&mut r, 6, 2);
    let labels = vec![0, 1, 1, 0, 1, 0];
    let probs = source(m.clone());
    let (score, _) = pactran_dirichlet(&probs, &labels, 2, None, &VariationalConfig::default()).unwrap();
    let exact = exact_log_evidence_dirichlet(&probs, &labels, 2, &default_prior(&labels, 2)).unwrap();
    assert!(score >= -exact - 1e-8);
    assert!(score + exact < 1.0, "slack {}", score + exact);
}

#[test]
fn exact_evidence_of_single_uniform_example() {
    let probs = source(Matrix::from_element(1, 2, 0.5));
    for y in 0..2 {
        let v = exact_log_evidence_dirichlet(&probs, &[y], 2, &[0.5, 0.5]).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-12);
    }
}

#[test]
fn gamma_bound_holds_against_library_monte_carlo_on_n6() {
    let mut r = rng(24);
    let m = random_simplex_rows(&mut r, 6, 2);
    let labels = vec![1, 0, 0, 1, 1, 0];
    let probs = source(m);
    let prior = default_prior(&labels, 2);
    let (score, _) = pactran_gamma(&probs, &labels, 2, None, &VariationalConfig::default()).unwrap();
    let mc = mc_log_evidence_gamma(&probs, &labels, 2, &prior, 100_000, 7).unwrap();
    assert!(score >= -mc.estimate - 3.0 * mc.standard_error);
}

#[test]
fn gamma_monte_carlo_ignores_prior_rate() {
    let mut r = rng(25);
    let probs = source(random_simplex_rows(&mut r, 5, 3));
    let labels = vec![0, 1, 2, 0, 1];
    let prior = [0.4, 0.4, 0.2];
    let one = mc_log_evidence_gamma_with_rate(&probs, &labels, 3, &prior, 5000, 3, 1.0).unwrap();
    let two = mc_log_evidence_gamma_with_rate(&probs, &labels, 3, &prior, 5000, 3, 2.0).unwrap();
    assert!((one.estimate - two.estimate).abs() < 1e-9);
}

#[test]
fn hessian_trace_at_zero_is_closed_form() {
    let mut r = rng(26);
    let x = gaussian_matrix(&mut r, 12, 3);
    let labels = random_labels(&mut r, 12, 4);
    let tr = trace_hessian_ce(&x, &labels, &Matrix::zeros(4, 4)).unwrap();
    let expected = 0.75 * (x.norm_squared() / 12.0 + 1.0);
    assert!((tr - expected).abs() < 1e-12);
}

#[test]
fn hessian_trace_matches_finite_differences_on_5x3() {
    let mut r = rng(27);
    let x = gaussian_matrix(&mut r, 5, 3);
    let labels = vec![0, 1, 1, 0, 1];
    let theta = gaussian_matrix(&mut r, 4, 2);
    let tr = trace_hessian_ce(&x, &labels, &theta).unwrap();
    let fd = fd_hessian_trace(|t| mean_cross_entropy(&x, &labels, t), &theta, 1e-4);
    assert!((tr - fd).abs() / fd < 1e-4);
}

fn instance(seed: u64) -> (Matrix, Vec<usize>, usize) {
    let mut r = rng(seed);
    let n = r.random_range(2..40);
    let z = r.random_range(1..6);
    let k = r.random_range(2..5);
    (random_simplex_rows(&mut r, n, z), random_labels(&mut r, n, k), k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dirichlet_state_invariants(seed in 0u64..10_000) {
        let (m, labels, k) = instance(seed);
        let n = labels.len() as f64;
        let (score, s) = pactran_dirichlet(&source(m), &labels, k, None, &VariationalConfig::default()).unwrap();
        prop_assert!(score.is_finite());
        for row in s.q.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        let mut excess = 0.0;
        for y in 0..k {
            for c in 0..s.alpha_tilde.ncols() {
                prop_assert!(s.alpha_tilde[(y, c)] >= s.alpha_prior[y]);
                excess += s.alpha_tilde[(y, c)] - s.alpha_prior[y];
            }
        }
        prop_assert!((excess - n).abs() < 1e-6);
        for w in s.elbo_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn gamma_state_invariants(seed in 0u64..10_000) {
        let (m, labels, k) = instance(seed);
        let (score, s) = pactran_gamma(&source(m * 3.0), &labels, k, None, &VariationalConfig::default()).unwrap();
        prop_assert!(score.is_finite());
        prop_assert_eq!(s.b, 1.0);
        for row in s.q.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        prop_assert!(s.lambda_tilde.iter().all(|&l| l > 0.0));
        for w in s.elbo_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn scores_ignore_example_order(seed in 0u64..10_000, shift in 1usize..50) {
        let (m, labels, k) = instance(seed);
        let n = labels.len();
        let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let pm = m.select_rows(order.iter());
        let pl: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let cfg = VariationalConfig::default();
        let a = leep_score(&source(m.clone()), &labels, k).unwrap().score;
        let b = leep_score(&source(pm.clone()), &pl, k).unwrap().score;
        prop_assert!((a - b).abs() < 1e-10);
        let a = nce_score(&source(m.clone()), &labels, k).unwrap();
        let b = nce_score(&source(pm.clone()), &pl, k).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
        let a = pactran_dirichlet(&source(m), &labels, k, None, &cfg).unwrap().0;
        let b = pactran_dirichlet(&source(pm), &pl, k, None, &cfg).unwrap().0;
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn gaussian_result_invariants(seed in 0u64..10_000, beta_factor in 0.1f64..10.0, s0 in 0.1f64..100.0) {
        let mut r = rng(seed);
        let n = r.random_range(4..30);
        let d = r.random_range(1..5);
        let k = r.random_range(2..4);
        let x = gaussian_matrix(&mut r, n, d);
        let labels = random_labels(&mut r, n, k);
        let beta = beta_factor * n as f64;
        let (score, g) = pactran_gaussian(&x, &labels, k, beta, s0).unwrap();
        prop_assert!(g.fr >= 0.0);
        prop_assert!(g.sigma_ratio >= 1.0);
        prop_assert!(g.trace_hessian >= 0.0);
        prop_assert!((score - (g.rer + g.fr)).abs() < 1e-12 * score.abs().max(1.0));
        prop_assert!((g.lambda - beta / s0).abs() < 1e-12 * g.lambda);
        let bound = (x.norm_squared() / n as f64 + 1.0) * 0.25 * k as f64;
        prop_assert!(g.trace_hessian <= bound + 1e-9);
    }
}
