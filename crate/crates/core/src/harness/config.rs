//! Metric selection and hyperparameter grids for benchmark runs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SubsampleSpec;
use crate::error::{Error, Result};
use crate::numerics::GmmConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    Leep,
    Nce,
    Nleep,
    HScore,
    Logme,
    Linear,
    LinearValid,
    PtDirichlet,
    PtGamma,
    PtGaussFix,
    PtGaussGrid,
}

impl MetricName {
    pub const ALL: [MetricName; 11] = [
        MetricName::Leep,
        MetricName::Nce,
        MetricName::Nleep,
        MetricName::HScore,
        MetricName::Logme,
        MetricName::Linear,
        MetricName::LinearValid,
        MetricName::PtDirichlet,
        MetricName::PtGamma,
        MetricName::PtGaussFix,
        MetricName::PtGaussGrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Leep => "leep",
            MetricName::Nce => "nce",
            MetricName::Nleep => "nleep",
            MetricName::HScore => "h-score",
            MetricName::Logme => "logme",
            MetricName::Linear => "linear",
            MetricName::LinearValid => "linear-valid",
            MetricName::PtDirichlet => "pt-dirichlet",
            MetricName::PtGamma => "pt-gamma",
            MetricName::PtGaussFix => "pt-gauss-fix",
            MetricName::PtGaussGrid => "pt-gauss-grid",
        }
    }

    /// Needs the source head's output distribution.
    pub fn needs_source_probs(self) -> bool {
        matches!(self, MetricName::Leep | MetricName::Nce | MetricName::PtDirichlet | MetricName::PtGamma)
    }

    /// Converts a raw score to "higher = more transferable".
    pub fn orient(self, raw: f64) -> f64 {
        match self {
            MetricName::Leep | MetricName::Nce | MetricName::Nleep | MetricName::HScore | MetricName::Logme => raw,
            MetricName::LinearValid => 1.0 - raw,
            MetricName::Linear
            | MetricName::PtDirichlet
            | MetricName::PtGamma
            | MetricName::PtGaussFix
            | MetricName::PtGaussGrid => -raw,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = MetricName::ALL.iter().map(|m| m.as_str()).collect();
                Error::validation(format!("unknown metric {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// `β = beta_factor · N`, `σ₀² = sigma0_sq_numerator / D_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussHparams {
    pub beta_factor: f64,
    pub sigma0_sq_numerator: f64,
}

impl GaussHparams {
    pub fn beta(&self, n: usize) -> f64 {
        self.beta_factor * n as f64
    }

    pub fn sigma0_sq(&self, d_eff: usize) -> f64 {
        self.sigma0_sq_numerator / d_eff as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    pub metrics: Vec<MetricName>,
    /// LINEAR and LINEAR-VALID β grid as multiples of N.
    pub linear_beta_factors: Vec<f64>,
    pub pt_gauss_fix: GaussHparams,
    pub pt_gauss_beta_factors: Vec<f64>,
    /// PT-Gauss σ₀² grid as multiples of `1/D_eff`.
    pub pt_gauss_sigma0_sq_numerators: Vec<f64>,
    pub nleep_energy: f64,
    pub gmm: GmmConfig,
    pub variational_iterations: usize,
    pub variational_tolerance: f64,
    /// Master seed for LINEAR-VALID folds and GMM initialization.
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            metrics: MetricName::ALL.to_vec(),
            linear_beta_factors: vec![0.1, 1.0, 10.0],
            pt_gauss_fix: GaussHparams {
                beta_factor: 10.0,
                sigma0_sq_numerator: 100.0,
            },
            pt_gauss_beta_factors: vec![0.1, 1.0, 10.0],
            pt_gauss_sigma0_sq_numerators: vec![1.0, 10.0, 100.0, 1000.0],
            nleep_energy: 0.8,
            gmm: GmmConfig::default(),
            variational_iterations: 10,
            variational_tolerance: 1e-6,
            seed: 0,
        }
    }
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::validation(format!("{name} must not be empty")));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::validation(format!("{name} contains {v}; entries must be positive")));
    }
    Ok(())
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::validation("no metrics enabled"));
        }
        check_positive("linear_beta_factors", &self.linear_beta_factors)?;
        check_positive("pt_gauss_beta_factors", &self.pt_gauss_beta_factors)?;
        check_positive("pt_gauss_sigma0_sq_numerators", &self.pt_gauss_sigma0_sq_numerators)?;
        check_positive(
            "pt_gauss_fix",
            &[self.pt_gauss_fix.beta_factor, self.pt_gauss_fix.sigma0_sq_numerator],
        )?;
        if !(self.nleep_energy > 0.0 && self.nleep_energy <= 1.0) {
            return Err(Error::validation(format!("nleep_energy must be in (0, 1], got {}", self.nleep_energy)));
        }
        if self.variational_iterations == 0 || !(self.variational_tolerance > 0.0) {
            return Err(Error::validation("variational iterations and tolerance must be positive"));
        }
        Ok(())
    }

    /// PT-Gauss grid in selection order: β ascending, then σ₀² ascending.
    pub fn gauss_grid(&self) -> Vec<GaussHparams> {
        let mut betas = self.pt_gauss_beta_factors.clone();
        let mut sigmas = self.pt_gauss_sigma0_sq_numerators.clone();
        betas.sort_by(f64::total_cmp);
        sigmas.sort_by(f64::total_cmp);
        betas
            .iter()
            .flat_map(|&b| {
                sigmas.iter().map(move |&s| GaussHparams {
                    beta_factor: b,
                    sigma0_sq_numerator: s,
                })
            })
            .collect()
    }

    pub fn linear_grid(&self) -> Vec<f64> {
        let mut betas = self.linear_beta_factors.clone();
        betas.sort_by(f64::total_cmp);
        betas
    }

    pub fn enabled(&self, metric: MetricName) -> bool {
        self.metrics.contains(&metric)
    }
}

/// Contents of the `rank` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subsample: SubsampleSpec,
    #[serde(default)]
    pub metrics: MetricConfig,
}

impl RunConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.subsample.validate()?;
        config.metrics.validate()?;
        Ok(config)
    }
}
