//! Report types shared by `rank` and `evaluate`.

use serde::{Deserialize, Serialize};

use super::config::{GaussHparams, MetricConfig, MetricName};
use crate::data::SubsampleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// The metric needs inputs this checkpoint does not provide.
    Unavailable,
    Failed,
}

/// One metric on one checkpoint for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub checkpoint: String,
    pub status: CellStatus,
    /// Oriented so that higher means more transferable.
    pub score: Option<f64>,
    /// Value as returned by the metric.
    pub raw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Cell {
    pub fn ok(checkpoint: &str, metric: MetricName, raw: f64) -> Self {
        Self {
            checkpoint: checkpoint.to_string(),
            status: CellStatus::Ok,
            score: Some(metric.orient(raw)),
            raw: Some(raw),
            message: None,
        }
    }

    pub fn unavailable(checkpoint: &str, message: impl Into<String>) -> Self {
        Self {
            checkpoint: checkpoint.to_string(),
            status: CellStatus::Unavailable,
            score: None,
            raw: None,
            message: Some(message.into()),
        }
    }

    pub fn failed(checkpoint: &str, message: impl Into<String>) -> Self {
        Self {
            checkpoint: checkpoint.to_string(),
            status: CellStatus::Failed,
            score: None,
            raw: None,
            message: Some(message.into()),
        }
    }

    pub fn with_message(mut self, message: Option<String>) -> Self {
        if message.is_some() {
            self.message = message;
        }
        self
    }
}

/// Hyperparameters picked by agreement with LINEAR-VALID.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub beta_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0_sq_numerator: Option<f64>,
    pub tau_vs_linear_valid: Option<f64>,
    /// Every candidate tied or too few checkpoints; the first was taken.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: MetricName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<Selection>,
    pub cells: Vec<Cell>,
}

impl MetricRow {
    pub fn scores(&self) -> Vec<Option<f64>> {
        self.cells.iter().map(|c| c.score).collect()
    }
}

/// Raw PT-Gauss values for one grid point, one entry per checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussGridEntry {
    pub hparams: GaussHparams,
    pub metric: Vec<Option<f64>>,
    pub rer: Vec<Option<f64>>,
    pub fr: Vec<Option<f64>>,
    /// Robust standard deviation of FR over checkpoints divided by that of RER.
    pub std_ratio: Option<f64>,
    pub tau_vs_linear_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGridEntry {
    pub beta_factor: f64,
    pub loss: Vec<Option<f64>>,
    pub tau_vs_linear_valid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: usize,
    pub num_examples: usize,
    pub indices: Vec<usize>,
    pub rows: Vec<MetricRow>,
    pub linear_grid: Vec<LinearGridEntry>,
    pub gauss_grid: Vec<GaussGridEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: MetricName,
    pub tau_per_split: Vec<Option<f64>>,
    pub mean_tau: Option<f64>,
    pub standard_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub task: Option<String>,
    pub num_classes: usize,
    pub checkpoints: Vec<String>,
    pub subsample: SubsampleSpec,
    pub config: MetricConfig,
    /// LINEAR β factor with the best mean agreement over all splits, as an
    /// alternative to the per-split choice.
    pub linear_shared_beta_factor: Option<f64>,
    pub splits: Vec<SplitReport>,
    /// Present when every checkpoint has a test error.
    pub summary: Vec<MetricSummary>,
}

impl RankingReport {
    pub fn row(&self, split: usize, metric: MetricName) -> Option<&MetricRow> {
        self.splits.get(split)?.rows.iter().find(|r| r.metric == metric)
    }
}
