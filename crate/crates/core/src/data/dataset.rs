use serde::Serialize;

use crate::error::{Error, Result};
use crate::Matrix;

/// Penultimate-layer features with their downstream labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl FeatureSet {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let report = dataset_report(&features, &labels, num_classes, None);
        if !report.violations.is_empty() {
            return Err(report.into_error());
        }
        if labels.is_empty() {
            return Err(Error::validation("a feature set needs at least one example"));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.num_classes)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

pub(crate) fn class_counts(labels: &[usize], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for &y in labels {
        if y < num_classes {
            counts[y] += 1;
        }
    }
    counts
}

/// Source-head outputs `M(x_i)_z`, one row per example.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDistribution {
    pub probs: Matrix,
    /// Every row sums to one within 1e-6.
    pub normalized: bool,
}

pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

impl SourceDistribution {
    pub fn new(probs: Matrix) -> Result<Self> {
        for i in 0..probs.nrows() {
            for j in 0..probs.ncols() {
                let v = probs[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::validation(format!("source probability at row {i}, column {j} is {v}")));
                }
            }
        }
        let normalized = probs
            .row_iter()
            .all(|r| (r.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE);
        Ok(Self { probs, normalized })
    }

    pub fn len(&self) -> usize {
        self.probs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.nrows() == 0
    }

    pub fn num_source_classes(&self) -> usize {
        self.probs.ncols()
    }

    pub fn subset(&self, indices: &[usize]) -> SourceDistribution {
        let probs = self.probs.select_rows(indices);
        SourceDistribution {
            normalized: self.normalized,
            probs,
        }
    }

    pub(crate) fn require_normalized(&self) -> Result<()> {
        if !self.normalized {
            return Err(Error::validation("source probabilities must have rows summing to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFiniteFeature { row: usize, column: usize },
    LabelOutOfRange { row: usize, label: usize },
    LabelCountMismatch { features: usize, labels: usize },
    ProbRowCountMismatch { features: usize, probs: usize },
    NegativeProb { row: usize, column: usize },
    NonFiniteProb { row: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetReport {
    pub num_examples: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub num_source_classes: Option<usize>,
    pub class_counts: Vec<usize>,
    pub absent_classes: Vec<usize>,
    pub probs_normalized: Option<bool>,
    pub violations: Vec<Violation>,
}

impl DatasetReport {
    fn into_error(self) -> Error {
        let parts: Vec<String> = self.violations.iter().map(|v| format!("{v:?}")).collect();
        Error::validation(parts.join("; "))
    }
}

/// Describe a dataset and collect every invariant violation.
pub fn dataset_report(features: &Matrix, labels: &[usize], num_classes: usize, probs: Option<&Matrix>) -> DatasetReport {
    let mut violations = Vec::new();
    for i in 0..features.nrows() {
        for j in 0..features.ncols() {
            if !features[(i, j)].is_finite() {
                violations.push(Violation::NonFiniteFeature { row: i, column: j });
            }
        }
    }
    if labels.len() != features.nrows() {
        violations.push(Violation::LabelCountMismatch {
            features: features.nrows(),
            labels: labels.len(),
        });
    }
    for (row, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            violations.push(Violation::LabelOutOfRange { row, label });
        }
    }
    let mut probs_normalized = None;
    if let Some(p) = probs {
        if p.nrows() != features.nrows() {
            violations.push(Violation::ProbRowCountMismatch {
                features: features.nrows(),
                probs: p.nrows(),
            });
        }
        for i in 0..p.nrows() {
            for j in 0..p.ncols() {
                let v = p[(i, j)];
                if !v.is_finite() {
                    violations.push(Violation::NonFiniteProb { row: i, column: j });
                } else if v < 0.0 {
                    violations.push(Violation::NegativeProb { row: i, column: j });
                }
            }
        }
        probs_normalized = Some(p.row_iter().all(|r| (r.sum() - 1.0).abs() <= NORMALIZATION_TOLERANCE));
    }
    let counts = class_counts(labels, num_classes);
    DatasetReport {
        num_examples: features.nrows(),
        feature_dim: features.ncols(),
        num_classes,
        num_source_classes: probs.map(|p| p.ncols()),
        absent_classes: counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(k, _)| k).collect(),
        class_counts: counts,
        probs_normalized,
        violations,
    }
}

/// Like [`dataset_report`], but any violation is a validation error.
pub fn validate_dataset(features: &Matrix, labels: &[usize], num_classes: usize, probs: Option<&Matrix>) -> Result<DatasetReport> {
    let report = dataset_report(features, labels, num_classes, probs);
    if report.violations.is_empty() {
        Ok(report)
    } else {
        Err(report.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clean(n: usize) -> (Matrix, Vec<usize>, Matrix) {
        let x = Matrix::from_fn(n, 3, |i, j| (i * 3 + j) as f64 * 0.1);
        let y = (0..n).map(|i| i % 3).collect();
        let p = Matrix::from_element(n, 4, 0.25);
        (x, y, p)
    }

    #[test]
    fn consistent_inputs_have_no_violations() {
        let (x, y, p) = clean(6);
        let r = validate_dataset(&x, &y, 4, Some(&p)).unwrap();
        assert!(r.violations.is_empty());
        assert_eq!(r.class_counts, vec![2, 2, 2, 0]);
        assert_eq!(r.absent_classes, vec![3]);
        assert_eq!(r.probs_normalized, Some(true));
        assert_eq!(r.num_source_classes, Some(4));
    }

    #[test]
    fn negative_probability_names_cell() {
        let (x, y, mut p) = clean(6);
        p[(4, 2)] = -0.1;
        let err = validate_dataset(&x, &y, 3, Some(&p)).unwrap_err().to_string();
        assert!(err.contains("row: 4") && err.contains("column: 2"), "{err}");
    }

    #[test]
    fn label_equal_to_k_is_rejected() {
        let (x, mut y, _) = clean(6);
        y[1] = 3;
        assert!(validate_dataset(&x, &y, 3, None).is_err());
        assert!(FeatureSet::new(x, y, 3).is_err());
    }

    #[test]
    fn row_count_mismatch() {
        let (x, y, _) = clean(6);
        let p = Matrix::from_element(5, 2, 0.5);
        assert!(validate_dataset(&x, &y, 3, Some(&p)).is_err());
    }

    #[test]
    fn corruption_harness_flags_exactly_the_inserted_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let (mut x, mut y, mut p) = clean(12);
            let mut expected = Vec::new();
            let mut touched = std::collections::HashSet::new();
            for _ in 0..rng.random_range(0..6) {
                match rng.random_range(0..4) {
                    0 => {
                        let (r, c) = (rng.random_range(0..12), rng.random_range(0..3));
                        if touched.insert(("x", r, c)) {
                            x[(r, c)] = f64::NAN;
                            expected.push(Violation::NonFiniteFeature { row: r, column: c });
                        }
                    }
                    1 => {
                        let r = rng.random_range(0..12);
                        if touched.insert(("y", r, 0)) {
                            y[r] = 3 + rng.random_range(0..5);
                            expected.push(Violation::LabelOutOfRange { row: r, label: y[r] });
                        }
                    }
                    2 => {
                        let (r, c) = (rng.random_range(0..12), rng.random_range(0..4));
                        if touched.insert(("p", r, c)) {
                            p[(r, c)] = -1.0;
                            expected.push(Violation::NegativeProb { row: r, column: c });
                        }
                    }
                    _ => {
                        let (r, c) = (rng.random_range(0..12), rng.random_range(0..4));
                        if touched.insert(("p", r, c)) {
                            p[(r, c)] = f64::INFINITY;
                            expected.push(Violation::NonFiniteProb { row: r, column: c });
                        }
                    }
                }
            }
            let report = dataset_report(&x, &y, 3, Some(&p));
            let mut got = report.violations.clone();
            let key = |v: &Violation| format!("{v:?}");
            got.sort_by_key(key);
            expected.sort_by_key(key);
            assert_eq!(got, expected);
        }
    }
}
