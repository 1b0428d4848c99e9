//! Synthetic checkpoint zoos with a known quality ordering.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{save_labels, save_tensor, CheckpointEntry, CheckpointManifest};
use crate::error::{Error, Result};
use crate::numerics::softmax_reg::softmax_rows;
use crate::numerics::{fit_l2_softmax, predict};
use crate::seed::derive_seed;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_checkpoints: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub num_source_classes: usize,
    /// Explicit per-checkpoint noise levels; overrides `noise_range`.
    pub noise_levels: Option<Vec<f64>>,
    /// Evenly spaced noise levels from the first to the second value.
    pub noise_range: (f64, f64),
    /// Multiplier on the source-head logits.
    pub source_scale: f64,
    /// Standard deviation of each noise coordinate.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_checkpoints: 12,
            n_train: 500,
            n_test: 2000,
            dim: 64,
            num_classes: 10,
            num_source_classes: 10,
            noise_levels: None,
            noise_range: (0.2, 0.5),
            source_scale: 1.0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn noise(&self) -> Vec<f64> {
        if let Some(levels) = &self.noise_levels {
            return levels.clone();
        }
        let (a, b) = self.noise_range;
        let c = self.num_checkpoints;
        if c == 1 {
            return vec![a];
        }
        (0..c).map(|i| a + (b - a) * i as f64 / (c - 1) as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_checkpoints == 0 || self.dim == 0 || self.num_classes < 2 || self.num_source_classes == 0 {
            return Err(Error::validation(
                "num_checkpoints, dim and num_source_classes must be positive and num_classes at least 2",
            ));
        }
        if self.n_train < self.num_classes || self.n_test == 0 {
            return Err(Error::validation("n_train must cover every class and n_test must be positive"));
        }
        let noise = self.noise();
        if noise.len() != self.num_checkpoints {
            return Err(Error::validation(format!(
                "{} noise levels for {} checkpoints",
                noise.len(),
                self.num_checkpoints
            )));
        }
        if noise.iter().any(|e| !(0.0..1.0).contains(e)) {
            return Err(Error::validation("noise levels must lie in [0, 1)"));
        }
        if noise.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("noise levels must be strictly increasing"));
        }
        if !(self.source_scale > 0.0 && self.source_scale.is_finite()) {
            return Err(Error::validation("source_scale must be positive"));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::validation("noise_scale must be positive"));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: SyntheticSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub manifest_path: PathBuf,
    pub manifest: CheckpointManifest,
    pub noise_levels: Vec<f64>,
    pub test_errors: Vec<f64>,
}

fn balanced_labels(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(rng);
    labels
}

fn features(means: &Matrix, labels: &[usize], noise: f64, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(labels.len(), means.ncols(), |i, j| {
        let eps: f64 = StandardNormal.sample(rng);
        means[(labels[i], j)] * (1.0 - noise) + noise * scale * eps
    })
}

/// Writes one features/probabilities pair per checkpoint plus a shared
/// label file and `manifest.json` into `out_dir`.
pub fn generate_synthetic_benchmark(spec: &SyntheticSpec, out_dir: impl AsRef<Path>) -> Result<SyntheticBenchmark> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (k, d) = (spec.num_classes, spec.dim);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[0]));
    let mut means = Matrix::from_fn(k, d, |_, _| StandardNormal.sample(&mut rng));
    for mut row in means.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    let train_labels = balanced_labels(spec.n_train, k, &mut rng);
    let test_labels = balanced_labels(spec.n_test, k, &mut rng);
    save_labels(&train_labels, out_dir.join("labels.ptrn"))?;

    let z = spec.num_source_classes.min(d);
    let noise = spec.noise();
    let mut entries = Vec::new();
    let mut test_errors = Vec::new();
    for (c, &eta) in noise.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[1, c as u64]));
        let train = features(&means, &train_labels, eta, spec.noise_scale, &mut rng);
        let test = features(&means, &test_labels, eta, spec.noise_scale, &mut rng);

        let mut probs = train.columns(0, z).into_owned() * (spec.source_scale * (1.0 - eta));
        softmax_rows(&mut probs);

        let probe = fit_l2_softmax(&train, &train_labels, k, 10.0 * spec.n_train as f64)?;
        let wrong = predict(&test, &probe.theta)
            .iter()
            .zip(&test_labels)
            .filter(|(p, y)| p != y)
            .count();
        let error = wrong as f64 / spec.n_test as f64;

        let id = format!("ckpt{c:02}");
        let features_file = format!("{id}_features.ptrn");
        let probs_file = format!("{id}_probs.ptrn");
        save_tensor(&train, out_dir.join(&features_file))?;
        save_tensor(&probs, out_dir.join(&probs_file))?;
        entries.push(CheckpointEntry {
            id,
            features_path: features_file.into(),
            labels_path: "labels.ptrn".into(),
            source_probs_path: Some(probs_file.into()),
            test_error: Some(error),
        });
        test_errors.push(error);
    }
    let manifest = CheckpointManifest {
        task: Some("synthetic".into()),
        num_classes: Some(k),
        entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    Ok(SyntheticBenchmark {
        manifest: CheckpointManifest::load(&manifest_path)?,
        manifest_path,
        noise_levels: noise,
        test_errors,
    })
}
