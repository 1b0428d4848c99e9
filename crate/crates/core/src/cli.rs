//! Command-line interface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::data::{load_labels, load_tensor, CheckpointManifest, FeatureSet, SourceDistribution};
use crate::error::{Error, Result};
use crate::harness::{
    evaluate_ranking, generate_synthetic_benchmark, run_metrics, std_ratio_rows, write_std_ratio_csv, MetricName,
    RankingReport, RunConfig, SyntheticSpec,
};
use crate::metrics::{
    default_prior, exact_log_evidence_dirichlet, h_score, leep_score, linear_metric, linear_valid_metric,
    logme_score, mc_log_evidence_gamma, nce_score, nleep_score, pactran_dirichlet, pactran_gamma,
    pactran_gaussian, trace_hessian_ce, MetricResult, VariationalConfig,
};
use crate::numerics::{cross_entropy, regularized_objective, GmmConfig};
use crate::Matrix;

#[derive(Debug, Parser)]
#[command(name = "pactran", version, about = "Transferability metrics for pretrained checkpoint selection")]
struct Cli {
    /// Master seed; overrides seeds from configuration files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one feature set with one metric and print the result as JSON.
    Compute {
        #[arg(long)]
        metric: String,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        source_probs: Option<PathBuf>,
        /// Number of classes (default: largest label + 1).
        #[arg(long)]
        num_classes: Option<usize>,
        /// Regularization β (default: 10·N).
        #[arg(long)]
        beta: Option<f64>,
        /// Prior variance σ₀² (default: 100/(D+1)).
        #[arg(long)]
        sigma0: Option<f64>,
    },
    /// Score every checkpoint of a manifest and write a ranking report.
    Rank {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// PT-Gauss grid diagnostics (default: next to the report).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Kendall-τ of a ranking report against the manifest's test errors.
    Evaluate {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic checkpoint zoo.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a metric against its reference oracle on seeded fixtures.
    Oracle {
        #[arg(long, value_enum)]
        kind: OracleKind,
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    DirichletExact,
    GammaMc,
    HessianFd,
    GradientFd,
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                1
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let seed = cli.seed;
    match cli.command {
        Command::Compute {
            metric,
            features,
            labels,
            source_probs,
            num_classes,
            beta,
            sigma0,
        } => {
            let metric: MetricName = metric.parse()?;
            let result = compute(metric, features, labels, source_probs, num_classes, beta, sigma0, seed.unwrap_or(0))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&result)?).map_err(io_err)?;
            Ok(0)
        }
        Command::Rank {
            manifest,
            config,
            out: path,
            csv,
        } => {
            let manifest = CheckpointManifest::load(&manifest)?;
            let mut config = RunConfig::load(&config)?;
            if let Some(s) = seed {
                config.subsample.seed = s;
                config.metrics.seed = s;
            }
            let report = run_metrics(&manifest, &config.subsample, &config.metrics)?;
            let text = serde_json::to_string_pretty(&report)?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
            let csv = csv.unwrap_or_else(|| path.with_extension("std_ratio.csv"));
            write_std_ratio_csv(&std_ratio_rows(&report), &csv)?;
            writeln!(out, "wrote {} and {}", path.display(), csv.display()).map_err(io_err)?;
            Ok(0)
        }
        Command::Evaluate {
            report,
            manifest,
            out: path,
        } => {
            let text = std::fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let report: RankingReport = serde_json::from_str(&text)?;
            let manifest = CheckpointManifest::load(&manifest)?;
            let table = evaluate_ranking(&report, &manifest)?;
            let json = serde_json::to_string_pretty(&table)?;
            if let Some(p) = path {
                std::fs::write(&p, json.clone() + "\n").map_err(|e| Error::io(&p, e))?;
            }
            writeln!(out, "{json}").map_err(io_err)?;
            write!(out, "{}", table.to_text()).map_err(io_err)?;
            Ok(0)
        }
        Command::Synth { spec, out: dir } => {
            let mut spec = match spec {
                Some(p) => SyntheticSpec::load(p)?,
                None => SyntheticSpec::default(),
            };
            if let Some(s) = seed {
                spec.seed = s;
            }
            let bench = generate_synthetic_benchmark(&spec, &dir)?;
            let summary = json!({
                "manifest": bench.manifest_path,
                "noise_levels": bench.noise_levels,
                "test_errors": bench.test_errors,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&summary)?).map_err(io_err)?;
            Ok(0)
        }
        Command::Oracle { kind, instances } => {
            let report = oracle(kind, instances.max(1), seed.unwrap_or(0))?;
            let passed = report["passed"].as_bool().unwrap_or(false);
            writeln!(out, "{}", serde_json::to_string_pretty(&report)?).map_err(io_err)?;
            Ok(if passed { 0 } else { 2 })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn compute(
    metric: MetricName,
    features: Option<PathBuf>,
    labels: PathBuf,
    source_probs: Option<PathBuf>,
    num_classes: Option<usize>,
    beta: Option<f64>,
    sigma0: Option<f64>,
    seed: u64,
) -> Result<MetricResult> {
    let labels = load_labels(&labels)?;
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    let name = metric.as_str();
    if metric.needs_source_probs() {
        let path = source_probs.ok_or_else(|| Error::validation(format!("{name} needs --source-probs")))?;
        let probs = SourceDistribution::new(load_tensor(&path)?)?;
        let variational = VariationalConfig::default();
        return Ok(match metric {
            MetricName::Leep => {
                let s = leep_score(&probs, &labels, k)?;
                MetricResult::new(name, s.score).flag(s.degenerate, "degenerate")
            }
            MetricName::Nce => MetricResult::new(name, nce_score(&probs, &labels, k)?),
            MetricName::PtDirichlet => {
                let (score, st) = pactran_dirichlet(&probs, &labels, k, None, &variational)?;
                MetricResult::new(name, score)
                    .with("iterations", st.iterations as f64)
                    .with("elbo", st.elbo_trace[st.elbo_trace.len() - 1])
                    .flag(!st.converged, "not_converged")
                    .flag(st.clamped, "clamped")
            }
            _ => {
                let (score, st) = pactran_gamma(&probs, &labels, k, None, &variational)?;
                MetricResult::new(name, score)
                    .with("iterations", st.iterations as f64)
                    .with("elbo", st.elbo_trace[st.elbo_trace.len() - 1])
                    .flag(!st.converged, "not_converged")
                    .flag(st.clamped, "clamped")
            }
        });
    }
    let path = features.ok_or_else(|| Error::validation(format!("{name} needs --features")))?;
    let data = FeatureSet::new(load_tensor(&path)?, labels, k)?;
    let n = data.len() as f64;
    let explicit_beta = beta;
    let beta = beta.unwrap_or(10.0 * n);
    Ok(match metric {
        MetricName::Nleep => {
            let s = nleep_score(&data, 0.8, k, seed, &GmmConfig::default())?;
            MetricResult::new(name, s.score)
                .with("pca_dim", s.pca_dim as f64)
                .with("gmm_log_likelihood", s.gmm_log_likelihood)
                .flag(!s.gmm_converged, "not_converged")
                .flag(s.degenerate, "degenerate")
        }
        MetricName::HScore => MetricResult::new(name, h_score(&data)?),
        MetricName::Logme => {
            let (score, st) = logme_score(&data)?;
            MetricResult::new(name, score).flag(!st.converged, "not_converged")
        }
        MetricName::Linear => {
            let (v, fit) = linear_metric(&data, beta)?;
            MetricResult::new(name, v)
                .with("beta", beta)
                .with("empirical_risk", fit.empirical_risk)
                .with("iterations", fit.iterations as f64)
                .flag(!fit.converged, "not_converged")
        }
        MetricName::LinearValid => {
            let grid = match explicit_beta {
                Some(b) => vec![b],
                None => vec![0.1 * n, n, 10.0 * n],
            };
            let r = linear_valid_metric(&data, &grid, seed)?;
            MetricResult::new(name, r.validation_error)
                .with("chosen_beta", r.chosen_beta)
                .with("fits", r.fits_performed as f64)
                .flag(!r.unsplit_classes.is_empty(), "class_in_one_fold")
        }
        _ => {
            let d_eff = data.dim() + 1;
            let sigma0_sq = sigma0.unwrap_or(100.0 / d_eff as f64);
            let (score, r) = pactran_gaussian(&data.features, &data.labels, k, beta, sigma0_sq)?;
            MetricResult::new(name, score)
                .with("rer", r.rer)
                .with("fr", r.fr)
                .with("trace_hessian", r.trace_hessian)
                .with("sigma_ratio", r.sigma_ratio)
                .with("beta", r.beta)
                .with("sigma0_sq", r.sigma0_sq)
                .with("lambda", r.lambda)
                .flag(!r.converged, "not_converged")
        }
    })
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize, z: usize) -> Matrix {
    let mut m = Matrix::from_fn(n, z, |_, _| rng.random::<f64>() + 1e-3);
    for mut row in m.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    m
}

fn random_instance(rng: &mut ChaCha8Rng) -> (SourceDistribution, Vec<usize>, usize) {
    let n = rng.random_range(1..=8);
    let k = rng.random_range(2..=3);
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    (SourceDistribution::new(random_probs(rng, n, 2)).expect("valid"), labels, k)
}

fn random_features(rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>, usize, Matrix) {
    let n = rng.random_range(3..12);
    let d = rng.random_range(1..5);
    let k = rng.random_range(2..4);
    let x = Matrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let labels = (0..n).map(|_| rng.random_range(0..k)).collect();
    let theta = Matrix::from_fn(d + 1, k, |_, _| rng.random_range(-1.0..1.0));
    (x, labels, k, theta)
}

fn oracle(kind: OracleKind, instances: usize, seed: u64) -> Result<serde_json::Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variational = VariationalConfig::default();
    let (name, tolerance, worst) = match kind {
        OracleKind::DirichletExact => {
            // Largest amount by which the bound undercuts the exact value.
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..instances {
                let (probs, labels, k) = random_instance(&mut rng);
                let prior = default_prior(&labels, k);
                let (score, _) = pactran_dirichlet(&probs, &labels, k, Some(&prior), &variational)?;
                let exact = exact_log_evidence_dirichlet(&probs, &labels, k, &prior)?;
                worst = worst.max(-exact - score);
            }
            ("dirichlet-exact", 1e-8, worst)
        }
        OracleKind::GammaMc => {
            let mut worst = f64::NEG_INFINITY;
            for i in 0..instances {
                let (probs, labels, k) = random_instance(&mut rng);
                let prior = default_prior(&labels, k);
                let (score, _) = pactran_gamma(&probs, &labels, k, Some(&prior), &variational)?;
                let mc = mc_log_evidence_gamma(&probs, &labels, k, &prior, 20_000, seed.wrapping_add(i as u64))?;
                worst = worst.max(-mc.estimate - 3.0 * mc.standard_error - score);
            }
            ("gamma-mc", 0.0, worst)
        }
        OracleKind::HessianFd => {
            let mut worst: f64 = 0.0;
            for _ in 0..instances {
                let (x, labels, _, theta) = random_features(&mut rng);
                let analytic = trace_hessian_ce(&x, &labels, &theta)?;
                let h = 1e-4;
                let base = cross_entropy(&x, &labels, &theta)?;
                let mut fd = 0.0;
                for idx in 0..theta.len() {
                    let mut plus = theta.clone();
                    let mut minus = theta.clone();
                    plus[idx] += h;
                    minus[idx] -= h;
                    fd += (cross_entropy(&x, &labels, &plus)? - 2.0 * base + cross_entropy(&x, &labels, &minus)?) / (h * h);
                }
                worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
            }
            ("hessian-fd", 1e-4, worst)
        }
        OracleKind::GradientFd => {
            let mut worst: f64 = 0.0;
            for _ in 0..instances {
                let (x, labels, _, theta) = random_features(&mut rng);
                let beta = rng.random_range(0.5..50.0);
                let (_, grad) = regularized_objective(&x, &labels, &theta, beta)?;
                let h = 1e-6;
                for idx in 0..theta.len() {
                    let mut plus = theta.clone();
                    let mut minus = theta.clone();
                    plus[idx] += h;
                    minus[idx] -= h;
                    let fd = (regularized_objective(&x, &labels, &plus, beta)?.0
                        - regularized_objective(&x, &labels, &minus, beta)?.0)
                        / (2.0 * h);
                    worst = worst.max((fd - grad[idx]).abs() / grad[idx].abs().max(1e-3));
                }
            }
            ("gradient-fd", 1e-5, worst)
        }
    };
    Ok(json!({
        "kind": name,
        "instances": instances,
        "seed": seed,
        "worst": worst,
        "tolerance": tolerance,
        "passed": worst <= tolerance,
    }))
}
