//! Full-covariance Gaussian mixture fitted by EM.

use nalgebra::Cholesky;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::reduce::lse;
use crate::Matrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the mean per-sample log-likelihood improves by less than this.
    pub tolerance: f64,
    /// Added to every covariance diagonal in each M-step.
    pub covariance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iterations: 200,
            tolerance: 1e-6,
            covariance_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `|V|×d`, one mean per row.
    pub means: Matrix,
    pub covariances: Vec<Matrix>,
    /// Mean per-sample log-likelihood of the training data.
    pub log_likelihood: f64,
    /// Mean per-sample log-likelihood at every EM iteration of the selected run.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }
}

pub fn gmm_fit(features: &Matrix, num_components: usize, seed: u64) -> Result<GmmModel> {
    gmm_fit_with(features, num_components, seed, &GmmConfig::default())
}

pub fn gmm_fit_with(features: &Matrix, num_components: usize, seed: u64, config: &GmmConfig) -> Result<GmmModel> {
    let n = features.nrows();
    if num_components == 0 {
        return Err(Error::validation("GMM needs at least one component"));
    }
    if num_components > n {
        return Err(Error::validation(format!(
            "GMM with {num_components} components needs at least as many points, got {n}"
        )));
    }
    if config.restarts == 0 || config.max_iterations == 0 || !(config.covariance_floor > 0.0) {
        return Err(Error::validation("invalid GMM configuration"));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("GMM features contain non-finite values"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<GmmModel> = None;
    for _ in 0..config.restarts {
        let run = fit_once(features, num_components, config, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.log_likelihood > b.log_likelihood) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn fit_once(x: &Matrix, v: usize, config: &GmmConfig, rng: &mut ChaCha8Rng) -> Result<GmmModel> {
    let n = x.nrows();
    let centers = kmeans_plus_plus(x, v, rng);
    let mut resp = Matrix::zeros(n, v);
    for i in 0..n {
        let nearest = (0..v)
            .min_by(|&a, &b| sq_dist(x, i, &centers[a]).total_cmp(&sq_dist(x, i, &centers[b])))
            .unwrap();
        resp[(i, nearest)] = 1.0;
    }
    let mut model = GmmModel {
        weights: vec![1.0 / v as f64; v],
        means: Matrix::zeros(v, x.ncols()),
        covariances: vec![Matrix::identity(x.ncols(), x.ncols()); v],
        log_likelihood: f64::NEG_INFINITY,
        log_likelihood_trace: Vec::new(),
        converged: false,
    };
    m_step(x, &resp, config.covariance_floor, &mut model);

    let mut trace: Vec<f64> = Vec::new();
    let mut previous: Option<GmmModel> = None;
    for it in 0..=config.max_iterations {
        let (log_joint, ll) = e_step(&model, x)?;
        if let Some(&last) = trace.last() {
            // The covariance floor can make a late step lose a little likelihood.
            if ll < last {
                model = previous.take().expect("a step was taken");
                model.converged = true;
                break;
            }
        }
        trace.push(ll);
        if it > 0 && ll - trace[it - 1] < config.tolerance {
            model.converged = true;
            break;
        }
        if it == config.max_iterations {
            break;
        }
        previous = Some(model.clone());
        for i in 0..n {
            let row: Vec<f64> = log_joint.row(i).iter().copied().collect();
            let norm = lse(&row);
            for c in 0..v {
                resp[(i, c)] = (row[c] - norm).exp();
            }
        }
        m_step(x, &resp, config.covariance_floor, &mut model);
    }
    model.log_likelihood = *trace.last().unwrap();
    model.log_likelihood_trace = trace;
    Ok(model)
}

fn sq_dist(x: &Matrix, i: usize, center: &[f64]) -> f64 {
    center.iter().enumerate().map(|(j, c)| (x[(i, j)] - c).powi(2)).sum()
}

fn kmeans_plus_plus(x: &Matrix, v: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.nrows();
    let row = |i: usize| x.row(i).iter().copied().collect::<Vec<f64>>();
    let mut centers = vec![row(rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers[0])).collect();
    while centers.len() < v {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                if u < *d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(row(pick));
        let c = centers.last().unwrap();
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, c));
        }
    }
    centers
}

fn m_step(x: &Matrix, resp: &Matrix, floor: f64, model: &mut GmmModel) {
    let (n, d) = x.shape();
    for c in 0..resp.ncols() {
        let weight: f64 = resp.column(c).sum();
        model.weights[c] = weight / n as f64;
        // An empty component keeps its previous mean and covariance.
        if weight < 1e-10 {
            continue;
        }
        let mean = x.tr_mul(&resp.column(c)) / weight;
        let mut cov = Matrix::zeros(d, d);
        for i in 0..n {
            let r = resp[(i, c)];
            if r == 0.0 {
                continue;
            }
            let diff = x.row(i).transpose() - &mean;
            cov.ger(r, &diff, &diff, 1.0);
        }
        cov /= weight;
        for j in 0..d {
            cov[(j, j)] += floor;
        }
        model.means.row_mut(c).copy_from(&mean.transpose());
        model.covariances[c] = cov;
    }
}

/// Per-component log of `α_v N(x_i | u_v, Σ_v)` and the mean log-likelihood.
fn e_step(model: &GmmModel, x: &Matrix) -> Result<(Matrix, f64)> {
    let (n, d) = x.shape();
    let v = model.num_components();
    let mut log_joint = Matrix::zeros(n, v);
    for c in 0..v {
        let chol = Cholesky::new(model.covariances[c].clone()).ok_or_else(|| Error::Numerical {
            message: format!("covariance of component {c} is not positive definite"),
            point: model.means.row(c).iter().copied().collect(),
        })?;
        let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(d).map(|l| l.ln()).sum::<f64>();
        let mut diffs = Matrix::zeros(d, n);
        for i in 0..n {
            for j in 0..d {
                diffs[(j, i)] = x[(i, j)] - model.means[(c, j)];
            }
        }
        let l = chol.l();
        let solved = l.solve_lower_triangular(&diffs).expect("cholesky factor is invertible");
        let log_w = model.weights[c].ln();
        for i in 0..n {
            let maha = solved.column(i).norm_squared();
            log_joint[(i, c)] = log_w - 0.5 * (d as f64 * LN_2PI + log_det + maha);
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let row: Vec<f64> = log_joint.row(i).iter().copied().collect();
        total += lse(&row);
    }
    Ok((log_joint, total / n as f64))
}

/// Cluster posteriors `p(v | s_i) ∝ α_v N(s_i | u_v, Σ_v)`, one row per point.
pub fn gmm_posterior(model: &GmmModel, features: &Matrix) -> Result<Matrix> {
    if features.ncols() != model.dim() {
        return Err(Error::validation(format!(
            "GMM has dimension {}, features have {} columns",
            model.dim(),
            features.ncols()
        )));
    }
    let (mut post, _) = e_step(model, features)?;
    for i in 0..post.nrows() {
        let row: Vec<f64> = post.row(i).iter().copied().collect();
        let norm = lse(&row);
        for c in 0..post.ncols() {
            post[(i, c)] = (row[c] - norm).exp();
        }
    }
    Ok(post)
}
