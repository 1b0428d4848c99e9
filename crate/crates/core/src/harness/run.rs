//! Scoring every checkpoint on every split.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::{MetricConfig, MetricName};
use super::evaluate::{robust_std, summarize};
use super::report::{Cell, GaussGridEntry, LinearGridEntry, MetricRow, RankingReport, Selection, SplitReport};
use super::select::select_hparams_via_linear_valid;
use crate::data::{load_labels, load_tensor, subsample_indices, CheckpointEntry, CheckpointManifest, FeatureSet};
use crate::data::{SourceDistribution, SubsampleSpec};
use crate::error::{Error, Result};
use crate::metrics::{
    h_score, leep_score, linear_valid_metric, logme_score, nce_score, nleep_score, pactran_dirichlet,
    pactran_gamma, pactran_gaussian_from_fit, GaussResult, VariationalConfig,
};
use crate::numerics::{fit_l2_softmax, SoftmaxFit};
use crate::seed::{derive_seed, hash_str};

/// Environment variable holding the worker count (0 or unset: all cores).
pub const WORKERS_ENV: &str = "PACTRAN_WORKERS";

struct Checkpoint {
    features: crate::Matrix,
    labels: Vec<usize>,
    probs: Option<SourceDistribution>,
}

fn load_checkpoint(entry: &CheckpointEntry) -> Result<Checkpoint> {
    let features = load_tensor(&entry.features_path)?;
    let labels = load_labels(&entry.labels_path)?;
    if labels.len() != features.nrows() {
        return Err(Error::validation(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.nrows()
        )));
    }
    let probs = match &entry.source_probs_path {
        Some(p) => {
            let m = load_tensor(p)?;
            if m.nrows() != features.nrows() {
                return Err(Error::validation(format!(
                    "{} source-probability rows for {} feature rows",
                    m.nrows(),
                    features.nrows()
                )));
            }
            Some(SourceDistribution::new(m)?)
        }
        None => None,
    };
    Ok(Checkpoint { features, labels, probs })
}

/// Everything computed for one (checkpoint, split).
struct Unit {
    cells: BTreeMap<MetricName, Cell>,
    linear: Vec<std::result::Result<f64, String>>,
    gauss: Vec<std::result::Result<GaussResult, String>>,
    linear_valid_error: Option<f64>,
}

impl Unit {
    fn failed(id: &str, message: &str, config: &MetricConfig, grid_len: usize, linear_len: usize) -> Self {
        let cells = config
            .metrics
            .iter()
            .map(|&m| (m, Cell::failed(id, message)))
            .collect();
        Self {
            cells,
            linear: vec![Err(message.to_string()); linear_len],
            gauss: vec![Err(message.to_string()); grid_len],
            linear_valid_error: None,
        }
    }
}

fn cell_from<T>(id: &str, metric: MetricName, r: Result<T>, raw: impl Fn(&T) -> f64) -> Cell {
    match r {
        Ok(v) => {
            let value = raw(&v);
            let cell = Cell::ok(id, metric, value);
            if value.is_finite() {
                cell
            } else {
                cell.with_message(Some("degenerate".into()))
            }
        }
        Err(e) => Cell::failed(id, e.to_string()),
    }
}

fn compute_unit(
    id: &str,
    ckpt: &Checkpoint,
    indices: &[usize],
    num_classes: usize,
    split: usize,
    config: &MetricConfig,
) -> Unit {
    let grid = config.gauss_grid();
    let linear_grid = config.linear_grid();
    let data = match FeatureSet::new(ckpt.features.select_rows(indices), indices.iter().map(|&i| ckpt.labels[i]).collect(), num_classes) {
        Ok(d) => d,
        Err(e) => return Unit::failed(id, &e.to_string(), config, grid.len(), linear_grid.len()),
    };
    let n = data.len();
    let d_eff = data.dim() + 1;
    let probs = ckpt.probs.as_ref().map(|p| p.subset(indices));
    let variational = VariationalConfig {
        max_iterations: config.variational_iterations,
        tolerance: config.variational_tolerance,
    };

    let mut fits: Vec<(f64, std::result::Result<SoftmaxFit, String>)> = Vec::new();
    let mut fit_at = |beta: f64| -> std::result::Result<SoftmaxFit, String> {
        if let Some((_, f)) = fits.iter().find(|(b, _)| *b == beta) {
            return f.clone();
        }
        let f = fit_l2_softmax(&data.features, &data.labels, num_classes, beta).map_err(|e| e.to_string());
        fits.push((beta, f.clone()));
        f
    };

    let mut cells = BTreeMap::new();
    let gauss_for = |fit: std::result::Result<SoftmaxFit, String>, beta: f64, s2: f64| {
        fit.and_then(|f| pactran_gaussian_from_fit(&data.features, &data.labels, &f, beta, s2).map_err(|e| e.to_string()))
    };

    let need_selection = config.enabled(MetricName::Linear) || config.enabled(MetricName::PtGaussGrid);
    let mut linear = Vec::new();
    if config.enabled(MetricName::Linear) {
        for &factor in &linear_grid {
            linear.push(fit_at(factor * n as f64).map(|f| f.loss));
        }
    }
    let mut gauss = Vec::new();
    if config.enabled(MetricName::PtGaussGrid) {
        for h in &grid {
            let beta = h.beta(n);
            gauss.push(gauss_for(fit_at(beta), beta, h.sigma0_sq(d_eff)));
        }
    }
    if config.enabled(MetricName::PtGaussFix) {
        let h = config.pt_gauss_fix;
        let beta = h.beta(n);
        let r = gauss_for(fit_at(beta), beta, h.sigma0_sq(d_eff));
        let cell = match r {
            Ok(g) => Cell::ok(id, MetricName::PtGaussFix, g.metric),
            Err(e) => Cell::failed(id, e),
        };
        cells.insert(MetricName::PtGaussFix, cell);
    }

    let mut linear_valid_error = None;
    if config.enabled(MetricName::LinearValid) || need_selection {
        let betas: Vec<f64> = linear_grid.iter().map(|f| f * n as f64).collect();
        let seed = derive_seed(config.seed, &[hash_str("linear-valid"), split as u64]);
        let r = linear_valid_metric(&data, &betas, seed);
        if let Ok(v) = &r {
            linear_valid_error = Some(v.validation_error);
        }
        let cell = match r {
            Ok(v) => {
                let note = (!v.unsplit_classes.is_empty())
                    .then(|| format!("classes {:?} appear in only one fold", v.unsplit_classes));
                Cell::ok(id, MetricName::LinearValid, v.validation_error).with_message(note)
            }
            Err(e) => Cell::failed(id, e.to_string()),
        };
        if config.enabled(MetricName::LinearValid) {
            cells.insert(MetricName::LinearValid, cell);
        }
    }

    for &metric in &config.metrics {
        if metric.needs_source_probs() {
            let Some(p) = probs.as_ref() else {
                cells.insert(metric, Cell::unavailable(id, "no source probabilities for this checkpoint"));
                continue;
            };
            let cell = match metric {
                MetricName::Leep => cell_from(id, metric, leep_score(p, &data.labels, num_classes), |s| s.score),
                MetricName::Nce => cell_from(id, metric, nce_score(p, &data.labels, num_classes), |s| *s),
                MetricName::PtDirichlet => cell_from(
                    id,
                    metric,
                    pactran_dirichlet(p, &data.labels, num_classes, None, &variational),
                    |s| s.0,
                ),
                MetricName::PtGamma => cell_from(
                    id,
                    metric,
                    pactran_gamma(p, &data.labels, num_classes, None, &variational),
                    |s| s.0,
                ),
                _ => unreachable!("covered by needs_source_probs"),
            };
            cells.insert(metric, cell);
            continue;
        }
        let cell = match metric {
            MetricName::Nleep => {
                let seed = derive_seed(config.seed, &[hash_str("nleep"), hash_str(id), split as u64]);
                cell_from(id, metric, nleep_score(&data, config.nleep_energy, num_classes, seed, &config.gmm), |s| {
                    s.score
                })
            }
            MetricName::HScore => cell_from(id, metric, h_score(&data), |s| *s),
            MetricName::Logme => cell_from(id, metric, logme_score(&data), |s| s.0),
            _ => continue,
        };
        cells.insert(metric, cell);
    }

    Unit {
        cells,
        linear,
        gauss,
        linear_valid_error,
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::validation(format!("{WORKERS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::validation(format!("cannot start worker pool: {e}")))
}

/// Kendall-τ of one raw-loss vector against LINEAR-VALID errors, over the
/// checkpoints where every candidate is available.
fn selection_inputs(candidates: &[Vec<Option<f64>>], errors: &[Option<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let keep: Vec<usize> = (0..errors.len())
        .filter(|&c| errors[c].is_some() && candidates.iter().all(|v| v[c].is_some_and(f64::is_finite)))
        .collect();
    let scores = candidates
        .iter()
        .map(|v| keep.iter().map(|&c| v[c].expect("kept")).collect())
        .collect();
    let errs = keep.iter().map(|&c| errors[c].expect("kept")).collect();
    (scores, errs)
}

fn select(candidates: &[Vec<Option<f64>>], errors: &[Option<f64>]) -> (usize, Vec<Option<f64>>, bool) {
    let (scores, errs) = selection_inputs(candidates, errors);
    match select_hparams_via_linear_valid(&scores, &errs) {
        Ok(s) => (s.index, s.taus.into_iter().map(Some).collect(), s.degenerate),
        Err(_) => (0, vec![None; candidates.len()], true),
    }
}

/// Scores every enabled metric on every checkpoint and split. Subsample
/// indices come from the first checkpoint whose files load; every other
/// checkpoint must carry the same labels.
pub fn run_metrics(manifest: &CheckpointManifest, spec: &SubsampleSpec, config: &MetricConfig) -> Result<RankingReport> {
    spec.validate()?;
    config.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::validation("manifest has no checkpoints"));
    }
    let pool = worker_pool()?;
    let loaded: Vec<Result<Checkpoint>> = pool.install(|| manifest.entries.par_iter().map(load_checkpoint).collect());
    let reference = loaded
        .iter()
        .find_map(|c| c.as_ref().ok())
        .ok_or_else(|| Error::validation("no checkpoint in the manifest could be loaded"))?;
    let labels = reference.labels.clone();
    let num_classes = match manifest.num_classes {
        Some(k) => k,
        None => labels.iter().max().map_or(0, |m| m + 1),
    };
    let loaded: Vec<std::result::Result<Checkpoint, String>> = loaded
        .into_iter()
        .map(|c| match c {
            Ok(c) if c.labels != labels => Err("labels differ from the other checkpoints".to_string()),
            Ok(c) => Ok(c),
            Err(e) => Err(e.to_string()),
        })
        .collect();

    let split_indices = (0..spec.num_splits)
        .map(|s| subsample_indices(&labels, num_classes, spec, s))
        .collect::<Result<Vec<_>>>()?;

    let grid = config.gauss_grid();
    let linear_grid = config.linear_grid();
    let work: Vec<(usize, usize)> = (0..spec.num_splits)
        .flat_map(|s| (0..manifest.entries.len()).map(move |c| (s, c)))
        .collect();
    let units: Vec<Unit> = pool.install(|| {
        work.par_iter()
            .map(|&(s, c)| {
                let id = &manifest.entries[c].id;
                match &loaded[c] {
                    Ok(ckpt) => compute_unit(id, ckpt, &split_indices[s], num_classes, s, config),
                    Err(e) => Unit::failed(id, e, config, grid.len(), linear_grid.len()),
                }
            })
            .collect()
    });

    let num_ckpt = manifest.entries.len();
    let ids: Vec<String> = manifest.entries.iter().map(|e| e.id.clone()).collect();
    let mut splits = Vec::with_capacity(spec.num_splits);
    let mut linear_taus_by_split: Vec<Vec<Option<f64>>> = Vec::new();
    for (s, indices) in split_indices.into_iter().enumerate() {
        let units = &units[s * num_ckpt..(s + 1) * num_ckpt];
        let lv_errors: Vec<Option<f64>> = units.iter().map(|u| u.linear_valid_error).collect();

        let mut linear_entries = Vec::new();
        let mut linear_row = None;
        if config.enabled(MetricName::Linear) {
            let candidates: Vec<Vec<Option<f64>>> = (0..linear_grid.len())
                .map(|j| units.iter().map(|u| u.linear[j].as_ref().ok().copied()).collect())
                .collect();
            let (best, taus, degenerate) = select(&candidates, &lv_errors);
            linear_taus_by_split.push(taus.clone());
            let cells = units
                .iter()
                .zip(&ids)
                .map(|(u, id)| match &u.linear[best] {
                    Ok(v) => Cell::ok(id, MetricName::Linear, *v),
                    Err(e) => Cell::failed(id, e.clone()),
                })
                .collect();
            linear_row = Some(MetricRow {
                metric: MetricName::Linear,
                selected: Some(Selection {
                    beta_factor: linear_grid[best],
                    sigma0_sq_numerator: None,
                    tau_vs_linear_valid: taus[best],
                    degenerate,
                }),
                cells,
            });
            for (j, &factor) in linear_grid.iter().enumerate() {
                linear_entries.push(LinearGridEntry {
                    beta_factor: factor,
                    loss: candidates[j].clone(),
                    tau_vs_linear_valid: taus[j],
                });
            }
        }

        let mut gauss_entries = Vec::new();
        let mut gauss_row = None;
        if config.enabled(MetricName::PtGaussGrid) {
            let candidates: Vec<Vec<Option<f64>>> = (0..grid.len())
                .map(|j| units.iter().map(|u| u.gauss[j].as_ref().ok().map(|g| g.metric)).collect())
                .collect();
            let (best, taus, degenerate) = select(&candidates, &lv_errors);
            let cells = units
                .iter()
                .zip(&ids)
                .map(|(u, id)| match &u.gauss[best] {
                    Ok(g) => Cell::ok(id, MetricName::PtGaussGrid, g.metric),
                    Err(e) => Cell::failed(id, e.clone()),
                })
                .collect();
            gauss_row = Some(MetricRow {
                metric: MetricName::PtGaussGrid,
                selected: Some(Selection {
                    beta_factor: grid[best].beta_factor,
                    sigma0_sq_numerator: Some(grid[best].sigma0_sq_numerator),
                    tau_vs_linear_valid: taus[best],
                    degenerate,
                }),
                cells,
            });
            for (j, h) in grid.iter().enumerate() {
                let part = |f: fn(&GaussResult) -> f64| -> Vec<Option<f64>> {
                    units.iter().map(|u| u.gauss[j].as_ref().ok().map(f)).collect()
                };
                let rer = part(|g| g.rer);
                let fr = part(|g| g.fr);
                let std_ratio = match (robust_std(&fr), robust_std(&rer)) {
                    (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                    _ => None,
                };
                gauss_entries.push(GaussGridEntry {
                    hparams: *h,
                    metric: part(|g| g.metric),
                    rer,
                    fr,
                    std_ratio,
                    tau_vs_linear_valid: taus[j],
                });
            }
        }

        let mut rows = Vec::new();
        for metric in MetricName::ALL.into_iter().filter(|m| config.enabled(*m)) {
            let row = match metric {
                MetricName::Linear => linear_row.take().expect("built above"),
                MetricName::PtGaussGrid => gauss_row.take().expect("built above"),
                _ => MetricRow {
                    metric,
                    selected: None,
                    cells: units
                        .iter()
                        .zip(&ids)
                        .map(|(u, id)| {
                            u.cells
                                .get(&metric)
                                .cloned()
                                .unwrap_or_else(|| Cell::failed(id, "not computed"))
                        })
                        .collect(),
                },
            };
            rows.push(row);
        }
        splits.push(SplitReport {
            split: s,
            num_examples: indices.len(),
            indices,
            rows,
            linear_grid: linear_entries,
            gauss_grid: gauss_entries,
        });
    }

    let linear_shared_beta_factor = if linear_taus_by_split.is_empty() {
        None
    } else {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..linear_grid.len() {
            let vals: Vec<f64> = linear_taus_by_split.iter().filter_map(|t| t[j]).collect();
            if vals.is_empty() {
                continue;
            }
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if best.is_none_or(|(_, m)| mean > m) {
                best = Some((j, mean));
            }
        }
        best.map(|(j, _)| linear_grid[j])
    };

    let mut report = RankingReport {
        task: manifest.task.clone(),
        num_classes,
        checkpoints: ids,
        subsample: spec.clone(),
        config: config.clone(),
        linear_shared_beta_factor,
        splits,
        summary: Vec::new(),
    };
    if let Ok(errors) = manifest.test_errors() {
        report.summary = summarize(&report, &errors)?;
    }
    Ok(report)
}
