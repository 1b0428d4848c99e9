//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use pactran::data::SourceDistribution;
use pactran::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_fn(n, d, |_, _| StandardNormal.sample(rng))
}

pub fn random_simplex_rows(rng: &mut ChaCha8Rng, n: usize, z: usize) -> Matrix {
    let mut m = Matrix::from_fn(n, z, |_, _| rng.random::<f64>() + 1e-3);
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// `(1/(C(C−1))) Σ_{i≠j} sign(a_i−a_j) sign(b_i−b_j)` by brute force.
pub fn kendall_direct(a: &[f64], b: &[f64]) -> f64 {
    let c = a.len();
    let sign = |x: f64| {
        if x > 0.0 {
            1i64
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut total = 0i64;
    for i in 0..c {
        for j in 0..c {
            if i != j {
                total += sign(a[i] - a[j]) * sign(b[i] - b[j]);
            }
        }
    }
    total as f64 / (c * (c - 1)) as f64
}

/// Mean cross-entropy of softmax logits `[X 1] θ`, written out directly.
pub fn mean_cross_entropy(x: &Matrix, labels: &[usize], theta: &Matrix) -> f64 {
    let (n, d) = x.shape();
    let k = theta.ncols();
    let mut total = 0.0;
    for i in 0..n {
        let logits: Vec<f64> = (0..k)
            .map(|c| (0..d).map(|j| x[(i, j)] * theta[(j, c)]).sum::<f64>() + theta[(d, c)])
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += lse - logits[labels[i]];
    }
    total / n as f64
}

pub fn regularized(x: &Matrix, labels: &[usize], theta: &Matrix, beta: f64) -> f64 {
    mean_cross_entropy(x, labels, theta) + theta.norm_squared() / (2.0 * beta)
}

/// Central-difference gradient of `f` at `theta`.
pub fn fd_gradient(f: impl Fn(&Matrix) -> f64, theta: &Matrix, h: f64) -> Matrix {
    let mut g = Matrix::zeros(theta.nrows(), theta.ncols());
    for idx in 0..theta.len() {
        let mut p = theta.clone();
        let mut m = theta.clone();
        p[idx] += h;
        m[idx] -= h;
        g[idx] = (f(&p) - f(&m)) / (2.0 * h);
    }
    g
}

/// Sum of central second differences along every coordinate.
pub fn fd_hessian_trace(f: impl Fn(&Matrix) -> f64, theta: &Matrix, h: f64) -> f64 {
    let base = f(theta);
    let mut total = 0.0;
    for idx in 0..theta.len() {
        let mut p = theta.clone();
        let mut m = theta.clone();
        p[idx] += h;
        m[idx] -= h;
        total += (f(&p) - 2.0 * base + f(&m)) / (h * h);
    }
    total
}

/// Plain gradient descent on the regularized softmax objective with a
/// fixed step, run until the gradient is negligible.
pub fn gradient_descent_fit(x: &Matrix, labels: &[usize], k: usize, beta: f64, steps: usize) -> Matrix {
    let (n, d) = x.shape();
    let mut theta = Matrix::zeros(d + 1, k);
    let max_sq = (0..n).map(|i| x.row(i).norm_squared() + 1.0).fold(0.0, f64::max);
    // Curvature of the mean cross-entropy is at most max‖x̃‖²/2.
    let step = 1.0 / (0.5 * max_sq + 1.0 / beta);
    for _ in 0..steps {
        let mut grad = &theta / beta;
        for i in 0..n {
            let logits: Vec<f64> = (0..k)
                .map(|c| (0..d).map(|j| x[(i, j)] * theta[(j, c)]).sum::<f64>() + theta[(d, c)])
                .collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let s: f64 = e.iter().sum();
            for c in 0..k {
                let r = (e[c] / s - if labels[i] == c { 1.0 } else { 0.0 }) / n as f64;
                for j in 0..d {
                    grad[(j, c)] += r * x[(i, j)];
                }
                grad[(d, c)] += r;
            }
        }
        if grad.amax() < 1e-13 {
            break;
        }
        theta -= grad * step;
    }
    theta
}

/// Exact log-evidence of the Dirichlet model by enumerating assignments
/// and scoring each with the sequential Pólya-urn predictive.
pub fn polya_log_evidence(m: &Matrix, labels: &[usize], k: usize, alpha: &[f64]) -> f64 {
    let (n, z) = m.shape();
    let total = z.pow(n as u32);
    let mut sum = 0.0;
    for code in 0..total {
        let mut rest = code;
        let mut counts = vec![vec![0.0; z]; k];
        let mut p = 1.0;
        for i in 0..n {
            let c = rest % z;
            rest /= z;
            let col: f64 = (0..k).map(|y| alpha[y] + counts[y][c]).sum();
            p *= m[(i, c)] * (alpha[labels[i]] + counts[labels[i]][c]) / col;
            counts[labels[i]][c] += 1.0;
        }
        sum += p;
    }
    sum.ln()
}

/// Monte-Carlo log-evidence of the Gamma model: mean over prior draws of
/// the product of normalized likelihoods, with a delta-method error.
pub fn gamma_mc_log_evidence(m: &Matrix, labels: &[usize], k: usize, a: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let (n, z) = m.shape();
    let mut rng = rng(seed);
    let mut w = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v: Vec<Vec<f64>> = (0..k)
            .map(|y| {
                let g = Gamma::new(a[y], 1.0).unwrap();
                (0..z).map(|_| g.sample(&mut rng)).collect()
            })
            .collect();
        let mut log_p = 0.0;
        for i in 0..n {
            let num: f64 = (0..z).map(|c| m[(i, c)] * v[labels[i]][c]).sum();
            let den: f64 = (0..k).flat_map(|y| (0..z).map(move |c| (y, c))).map(|(y, c)| m[(i, c)] * v[y][c]).sum();
            log_p += (num / den).ln();
        }
        w.push(log_p);
    }
    let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = w.iter().map(|l| (l - max).exp()).collect();
    let count = samples as f64;
    let mean = scaled.iter().sum::<f64>() / count;
    let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
    (max + mean.ln(), (var / count).sqrt() / mean)
}

pub fn source(m: Matrix) -> SourceDistribution {
    SourceDistribution::new(m).unwrap()
}
