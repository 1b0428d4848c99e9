//! Transferability metrics.
//!
//! Sign conventions follow each metric's definition: the LEEP family and
//! LogME are log-likelihood-like (higher is better) while the PACTran
//! scores and LINEAR are losses (lower is better). The harness re-orients
//! everything to "higher is better" for ranking.

use std::collections::BTreeMap;

use serde::Serialize;

pub mod leep;
pub mod pactran;
pub mod regression;

pub use leep::{leep_conditional, leep_score, nce_score, nleep_score, LeepConditional, LeepScore, NleepScore};
pub use pactran::{
    default_prior, exact_log_evidence_dirichlet, mc_log_evidence_gamma, mc_log_evidence_gamma_with_rate, pactran_dirichlet, pactran_gamma,
    pactran_gaussian, pactran_gaussian_from_fit, trace_hessian_ce, DirichletState, GammaState, GaussResult,
    McEvidence, VariationalConfig,
};
pub use regression::{
    h_score, linear_metric, linear_valid_metric, logme_score, logme_score_with, LinearValidResult, LogmeConfig,
    LogmeState,
};

/// One metric evaluation as printed by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct MetricResult {
    pub metric: String,
    pub score: f64,
    pub diagnostics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl MetricResult {
    pub fn new(metric: impl Into<String>, score: f64) -> Self {
        Self {
            metric: metric.into(),
            score,
            diagnostics: BTreeMap::new(),
            flags: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn flag(mut self, cond: bool, name: &str) -> Self {
        if cond {
            self.flags.push(name.to_string());
        }
        self
    }
}
