//! Python bindings for the pactran transferability metrics.
//!
//! Matrices travel as lists of row lists and labels as lists of ints.

use std::path::PathBuf;

use pactran::data::{FeatureSet, SourceDistribution, SubsampleSpec};
use pactran::harness::{MetricConfig, SyntheticSpec};
use pactran::metrics::{self as m, VariationalConfig};
use pactran::{numerics, Error, Matrix};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Numerical { .. } => PyArithmeticError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(Matrix::from_row_iterator(n, d, rows.into_iter().flatten()))
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn classes(labels: &[usize], num_classes: Option<usize>) -> usize {
    num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |k| k + 1))
}

fn source(probs: Vec<Vec<f64>>) -> PyResult<SourceDistribution> {
    SourceDistribution::new(matrix(probs)?).map_err(to_py)
}

fn feature_set(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: Option<usize>) -> PyResult<FeatureSet> {
    let k = classes(&labels, num_classes);
    FeatureSet::new(matrix(features)?, labels, k).map_err(to_py)
}

/// LEEP score of source-head probabilities against target labels.
#[pyfunction]
#[pyo3(signature = (probs, labels, num_classes=None))]
fn leep(probs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: Option<usize>) -> PyResult<f64> {
    let k = classes(&labels, num_classes);
    Ok(m::leep_score(&source(probs)?, &labels, k).map_err(to_py)?.score)
}

#[pyfunction]
#[pyo3(signature = (probs, labels, num_classes=None))]
fn nce(probs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: Option<usize>) -> PyResult<f64> {
    let k = classes(&labels, num_classes);
    m::nce_score(&source(probs)?, &labels, k).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (features, labels, num_classes=None, energy=0.8, components=None, seed=0))]
fn nleep(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: Option<usize>,
    energy: f64,
    components: Option<usize>,
    seed: u64,
) -> PyResult<f64> {
    let data = feature_set(features, labels, num_classes)?;
    let v = components.unwrap_or(data.num_classes);
    let r = m::nleep_score(&data, energy, v, seed, &numerics::GmmConfig::default()).map_err(to_py)?;
    Ok(r.score)
}

#[pyfunction]
#[pyo3(signature = (features, labels, num_classes=None))]
fn h_score(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: Option<usize>) -> PyResult<f64> {
    m::h_score(&feature_set(features, labels, num_classes)?).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (features, labels, num_classes=None))]
fn logme(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: Option<usize>) -> PyResult<f64> {
    Ok(m::logme_score(&feature_set(features, labels, num_classes)?).map_err(to_py)?.0)
}

/// Regularized training loss of the linear probe.
#[pyfunction]
#[pyo3(signature = (features, labels, beta, num_classes=None))]
fn linear(features: Vec<Vec<f64>>, labels: Vec<usize>, beta: f64, num_classes: Option<usize>) -> PyResult<f64> {
    Ok(m::linear_metric(&feature_set(features, labels, num_classes)?, beta).map_err(to_py)?.0)
}

/// Held-out error and chosen β; the grid defaults to {0.1, 1, 10}·N.
#[pyfunction]
#[pyo3(signature = (features, labels, num_classes=None, betas=None, seed=0))]
fn linear_valid(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: Option<usize>,
    betas: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let data = feature_set(features, labels, num_classes)?;
    let n = data.len() as f64;
    let grid = betas.unwrap_or_else(|| vec![0.1 * n, n, 10.0 * n]);
    let r = m::linear_valid_metric(&data, &grid, seed).map_err(to_py)?;
    Ok((r.validation_error, r.chosen_beta))
}

/// PACTran-Dirichlet score and its ELBO trace.
#[pyfunction]
#[pyo3(signature = (probs, labels, num_classes=None, prior=None, max_iterations=10, tolerance=1e-6))]
fn pactran_dirichlet(
    probs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: Option<usize>,
    prior: Option<Vec<f64>>,
    max_iterations: usize,
    tolerance: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let k = classes(&labels, num_classes);
    let cfg = VariationalConfig {
        max_iterations,
        tolerance,
    };
    let (score, state) = m::pactran_dirichlet(&source(probs)?, &labels, k, prior.as_deref(), &cfg).map_err(to_py)?;
    Ok((score, state.elbo_trace))
}

/// PACTran-Gamma score and its ELBO trace; rows need not be normalized.
#[pyfunction]
#[pyo3(signature = (probs, labels, num_classes=None, prior=None, max_iterations=10, tolerance=1e-6))]
fn pactran_gamma(
    probs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: Option<usize>,
    prior: Option<Vec<f64>>,
    max_iterations: usize,
    tolerance: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let k = classes(&labels, num_classes);
    let cfg = VariationalConfig {
        max_iterations,
        tolerance,
    };
    let (score, state) = m::pactran_gamma(&source(probs)?, &labels, k, prior.as_deref(), &cfg).map_err(to_py)?;
    Ok((score, state.elbo_trace))
}

#[pyclass(name = "GaussResult", frozen, get_all)]
struct PyGaussResult {
    metric: f64,
    rer: f64,
    fr: f64,
    sigma_ratio: f64,
    trace_hessian: f64,
    beta: f64,
    sigma0_sq: f64,
    lambda_: f64,
    converged: bool,
    theta: Vec<Vec<f64>>,
}

#[pymethods]
impl PyGaussResult {
    fn __repr__(&self) -> String {
        format!("GaussResult(metric={}, rer={}, fr={})", self.metric, self.rer, self.fr)
    }
}

/// PACTran-Gaussian; β defaults to 10·N and σ₀² to 100/(D+1).
#[pyfunction]
#[pyo3(signature = (features, labels, num_classes=None, beta=None, sigma0_sq=None))]
fn pactran_gaussian(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: Option<usize>,
    beta: Option<f64>,
    sigma0_sq: Option<f64>,
) -> PyResult<PyGaussResult> {
    let k = classes(&labels, num_classes);
    let x = matrix(features)?;
    let beta = beta.unwrap_or(10.0 * x.nrows() as f64);
    let sigma0_sq = sigma0_sq.unwrap_or(100.0 / (x.ncols() + 1) as f64);
    let (_, g) = m::pactran_gaussian(&x, &labels, k, beta, sigma0_sq).map_err(to_py)?;
    Ok(PyGaussResult {
        metric: g.metric,
        rer: g.rer,
        fr: g.fr,
        sigma_ratio: g.sigma_ratio,
        trace_hessian: g.trace_hessian,
        beta: g.beta,
        sigma0_sq: g.sigma0_sq,
        lambda_: g.lambda,
        converged: g.converged,
        theta: rows(&g.theta_star),
    })
}

#[pyfunction]
fn trace_hessian_ce(features: Vec<Vec<f64>>, labels: Vec<usize>, theta: Vec<Vec<f64>>) -> PyResult<f64> {
    m::trace_hessian_ce(&matrix(features)?, &labels, &matrix(theta)?).map_err(to_py)
}

/// Fit the L2-regularized softmax probe; returns `(theta, loss)`.
#[pyfunction]
#[pyo3(signature = (features, labels, beta, num_classes=None))]
fn fit_l2_softmax(
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    beta: f64,
    num_classes: Option<usize>,
) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let k = classes(&labels, num_classes);
    let fit = numerics::fit_l2_softmax(&matrix(features)?, &labels, k, beta).map_err(to_py)?;
    Ok((rows(&fit.theta), fit.loss))
}

#[pyfunction]
fn kendall_tau(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    numerics::kendall_tau(&a, &b).map_err(to_py)
}

#[pyfunction]
fn exact_log_evidence_dirichlet(probs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize, prior: Vec<f64>) -> PyResult<f64> {
    m::exact_log_evidence_dirichlet(&source(probs)?, &labels, num_classes, &prior).map_err(to_py)
}

#[pyfunction]
fn load_tensor(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(&pactran::data::load_tensor(path).map_err(to_py)?))
}

#[pyfunction]
fn save_tensor(values: Vec<Vec<f64>>, path: PathBuf) -> PyResult<()> {
    pactran::data::save_tensor(&matrix(values)?, path).map_err(to_py)
}

#[pyfunction]
fn load_labels(path: PathBuf) -> PyResult<Vec<usize>> {
    pactran::data::load_labels(path).map_err(to_py)
}

#[pyfunction]
fn save_labels(labels: Vec<usize>, path: PathBuf) -> PyResult<()> {
    pactran::data::save_labels(&labels, path).map_err(to_py)
}

/// Write a synthetic checkpoint zoo and return the manifest path.
/// `spec` is a JSON object with any `SyntheticSpec` fields.
#[pyfunction]
#[pyo3(signature = (out_dir, spec=None))]
fn generate_synthetic_benchmark(out_dir: PathBuf, spec: Option<&str>) -> PyResult<PathBuf> {
    let spec: SyntheticSpec = match spec {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => SyntheticSpec::default(),
    };
    let b = pactran::harness::generate_synthetic_benchmark(&spec, out_dir).map_err(to_py)?;
    Ok(b.manifest_path)
}

/// Score every checkpoint of a manifest and return the report as JSON.
#[pyfunction]
#[pyo3(signature = (manifest, samples_per_class, seed=0, config=None))]
fn run_metrics(py: Python<'_>, manifest: PathBuf, samples_per_class: usize, seed: u64, config: Option<&str>) -> PyResult<String> {
    let manifest = pactran::data::CheckpointManifest::load(manifest).map_err(to_py)?;
    let mut config: MetricConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => MetricConfig::default(),
    };
    config.seed = seed;
    let spec = SubsampleSpec::new(samples_per_class, seed);
    let report = py
        .detach(|| pactran::harness::run_metrics(&manifest, &spec, &config))
        .map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn pactran_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGaussResult>()?;
    m.add_function(wrap_pyfunction!(leep, m)?)?;
    m.add_function(wrap_pyfunction!(nce, m)?)?;
    m.add_function(wrap_pyfunction!(nleep, m)?)?;
    m.add_function(wrap_pyfunction!(h_score, m)?)?;
    m.add_function(wrap_pyfunction!(logme, m)?)?;
    m.add_function(wrap_pyfunction!(linear, m)?)?;
    m.add_function(wrap_pyfunction!(linear_valid, m)?)?;
    m.add_function(wrap_pyfunction!(pactran_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(pactran_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(pactran_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(trace_hessian_ce, m)?)?;
    m.add_function(wrap_pyfunction!(fit_l2_softmax, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(exact_log_evidence_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(load_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(save_tensor, m)?)?;
    m.add_function(wrap_pyfunction!(load_labels, m)?)?;
    m.add_function(wrap_pyfunction!(save_labels, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(run_metrics, m)?)?;
    Ok(())
}
