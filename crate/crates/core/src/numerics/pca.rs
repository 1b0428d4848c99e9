use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

/// Centered PCA projection keeping the leading eigenvectors of the covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `d×d₀`, orthonormal rows.
    pub components: Matrix,
    /// Fraction of total variance carried by the retained components.
    pub explained_energy_fraction: f64,
    /// All covariance eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Set when the data had zero total variance.
    pub degenerate: bool,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn transform(&self, features: &Matrix) -> Result<Matrix> {
        if features.ncols() != self.mean.len() {
            return Err(Error::validation(format!(
                "PCA expects {} columns, got {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        let mut centered = features.clone();
        for (j, mut col) in centered.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.mean[j]);
        }
        Ok(centered * self.components.transpose())
    }
}

/// Fit PCA retaining the smallest number of components whose eigenvalues
/// reach `energy_fraction` of the total variance.
pub fn pca_fit(features: &Matrix, energy_fraction: f64) -> Result<PcaModel> {
    let (n, d0) = features.shape();
    if n < 2 {
        return Err(Error::validation("PCA needs at least two rows"));
    }
    if d0 == 0 {
        return Err(Error::validation("PCA needs at least one column"));
    }
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::validation(format!("energy fraction must lie in (0, 1], got {energy_fraction}")));
    }
    let mean: Vec<f64> = features.column_iter().map(|c| c.mean()).collect();
    let mut centered = features.clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let cov = centered.tr_mul(&centered) / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d0).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    if !(total > 0.0) {
        let mut components = Matrix::zeros(1, d0);
        components[(0, 0)] = 1.0;
        return Ok(PcaModel {
            mean,
            components,
            explained_energy_fraction: 1.0,
            eigenvalues,
            degenerate: true,
        });
    }

    let target = energy_fraction * total * (1.0 - 1e-12);
    let mut kept = 0;
    let mut acc = 0.0;
    while kept < d0 && acc < target {
        acc += eigenvalues[kept];
        kept += 1;
    }
    let kept = kept.max(1);
    let mut components = Matrix::zeros(kept, d0);
    for (r, &i) in order.iter().take(kept).enumerate() {
        components.row_mut(r).copy_from(&eig.eigenvectors.column(i).transpose());
    }
    Ok(PcaModel {
        mean,
        components,
        explained_energy_fraction: eigenvalues[..kept].iter().sum::<f64>() / total,
        eigenvalues,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn line_in_three_space_has_one_component() {
        let x = Matrix::from_fn(10, 3, |i, j| (i as f64 - 4.5) * [1.0, -2.0, 0.5][j] + 3.0);
        let m = pca_fit(&x, 0.8).unwrap();
        assert_eq!(m.dim(), 1);
        assert!((m.explained_energy_fraction - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_sample_needs_both_axes_at_full_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_fn(200, 2, |_, _| StandardNormal.sample(&mut rng));
        let m = pca_fit(&x, 1.0).unwrap();
        assert_eq!(m.dim(), 2);
        let gram = &m.components * m.components.transpose();
        assert!((gram - Matrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let x = Matrix::from_element(5, 4, 2.0);
        let m = pca_fit(&x, 0.8).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.dim(), 1);
        assert!(m.transform(&x).unwrap().amax() == 0.0);
    }

    #[test]
    fn rejects_single_row() {
        assert!(pca_fit(&Matrix::zeros(1, 3), 0.8).is_err());
    }
}
