//! Kendall-τ against ground-truth test errors and spread diagnostics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{MetricSummary, RankingReport};
use crate::data::CheckpointManifest;
use crate::error::{Error, Result};
use crate::numerics::kendall_tau;

/// Median absolute deviation scaled by 1.4826; `None` below two values.
pub fn robust_std(values: &[Option<f64>]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().flatten().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return None;
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 0 {
            0.5 * (v[m - 1] + v[m])
        } else {
            v[m]
        }
    };
    let med = median(&mut v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - med).abs()).collect();
    Some(1.4826 * median(&mut dev))
}

/// Mean and standard error of the available values.
pub fn mean_and_se(values: &[Option<f64>]) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.iter().flatten().copied().collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let se = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(se))
}

/// τ between oriented scores and `−e_M` over checkpoints with a score.
fn split_tau(scores: &[Option<f64>], errors: &[f64]) -> Option<f64> {
    let (a, b): (Vec<f64>, Vec<f64>) = scores
        .iter()
        .zip(errors)
        .filter_map(|(s, e)| s.filter(|v| !v.is_nan()).map(|v| (v, -e)))
        .unzip();
    kendall_tau(&a, &b).ok()
}

pub(crate) fn summarize(report: &RankingReport, errors: &[f64]) -> Result<Vec<MetricSummary>> {
    if errors.len() != report.checkpoints.len() {
        return Err(Error::validation(format!(
            "{} test errors for {} checkpoints",
            errors.len(),
            report.checkpoints.len()
        )));
    }
    let Some(first) = report.splits.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for metric in first.rows.iter().map(|r| r.metric) {
        let tau_per_split: Vec<Option<f64>> = report
            .splits
            .iter()
            .map(|s| s.rows.iter().find(|r| r.metric == metric).and_then(|r| split_tau(&r.scores(), errors)))
            .collect();
        let (mean_tau, standard_error) = mean_and_se(&tau_per_split);
        out.push(MetricSummary {
            metric,
            tau_per_split,
            mean_tau,
            standard_error,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdRatioRow {
    pub split: usize,
    pub beta_factor: f64,
    pub sigma0_sq_numerator: f64,
    pub std_ratio: Option<f64>,
    pub tau_vs_linear_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTable {
    pub summary: Vec<MetricSummary>,
    pub std_ratio: Vec<StdRatioRow>,
}

pub fn std_ratio_rows(report: &RankingReport) -> Vec<StdRatioRow> {
    report
        .splits
        .iter()
        .flat_map(|s| {
            s.gauss_grid.iter().map(move |g| StdRatioRow {
                split: s.split,
                beta_factor: g.hparams.beta_factor,
                sigma0_sq_numerator: g.hparams.sigma0_sq_numerator,
                std_ratio: g.std_ratio,
                tau_vs_linear_valid: g.tau_vs_linear_valid,
            })
        })
        .collect()
}

/// Per-metric τ against `−e_M` for each split, with mean and standard
/// error, plus the FR/RER spread ratio for every PT-Gauss grid point.
pub fn evaluate_ranking(report: &RankingReport, manifest: &CheckpointManifest) -> Result<EvaluationTable> {
    let mut errors = Vec::with_capacity(report.checkpoints.len());
    let mut missing = Vec::new();
    for id in &report.checkpoints {
        match manifest.entries.iter().find(|e| &e.id == id).and_then(|e| e.test_error) {
            Some(e) => errors.push(e),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::validation(format!("no test error for checkpoints: {}", missing.join(", "))));
    }
    Ok(EvaluationTable {
        summary: summarize(report, &errors)?,
        std_ratio: std_ratio_rows(report),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

impl EvaluationTable {
    /// Aligned plain-text rendering of the τ summary.
    pub fn to_text(&self) -> String {
        let splits = self.summary.first().map_or(0, |s| s.tau_per_split.len());
        let mut out = format!("{:<14} {:>8} {:>8}", "metric", "mean_tau", "se");
        for s in 0..splits {
            write!(out, " {:>8}", format!("split{s}")).expect("write to String");
        }
        out.push('\n');
        for row in &self.summary {
            write!(
                out,
                "{:<14} {:>8} {:>8}",
                row.metric.as_str(),
                fmt_opt(row.mean_tau),
                fmt_opt(row.standard_error)
            )
            .expect("write to String");
            for t in &row.tau_per_split {
                write!(out, " {:>8}", fmt_opt(*t)).expect("write to String");
            }
            out.push('\n');
        }
        out
    }
}

/// Writes the PT-Gauss grid diagnostics as CSV.
pub fn write_std_ratio_csv(rows: &[StdRatioRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::validation(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_std_of_symmetric_sample() {
        let v: Vec<Option<f64>> = [1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|&x| Some(x)).collect();
        assert!((robust_std(&v).unwrap() - 1.4826).abs() < 1e-12);
        assert_eq!(robust_std(&[Some(1.0)]), None);
    }

    #[test]
    fn mean_of_split_taus() {
        let taus: Vec<Option<f64>> = [1.0, 0.0, 1.0, 0.0, 1.0].iter().map(|&x| Some(x)).collect();
        let (mean, se) = mean_and_se(&taus);
        assert!((mean.unwrap() - 0.6).abs() < 1e-15);
        assert!((se.unwrap() - (0.3f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn split_tau_orientation() {
        let errors = [0.1, 0.2, 0.3];
        let s: Vec<Option<f64>> = errors.iter().map(|e| Some(-e)).collect();
        assert_eq!(split_tau(&s, &errors), Some(1.0));
        assert_eq!(split_tau(&[Some(1.0); 3], &errors), Some(0.0));
    }
}
