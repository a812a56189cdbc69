use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal axes of centered data, ordered by decreasing variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `[k × d]`, one unit-norm component per row.
    pub components: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// Sum of all covariance eigenvalues.
    pub total_variance: f64,
}

impl Pca {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|e| if self.total_variance > 0.0 { e / self.total_variance } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::shape(self.mean.len(), x.ncols()));
        }
        Ok((x - &self.mean).dot(&self.components.t()))
    }

    pub fn inverse_transform(&self, z: &Array2<f64>) -> Array2<f64> {
        z.dot(&self.components) + &self.mean
    }
}

/// Fit `k` components from the covariance eigendecomposition. Each component
/// is signed so that its largest-magnitude coordinate is positive.
pub fn pca_fit(x: &Array2<f64>, k: usize) -> Result<Pca> {
    let (n, d) = x.dim();
    if n < 2 || k == 0 || k > (n - 1).min(d) {
        return Err(Error::invalid(format!(
            "cannot fit {k} components to {n} samples of dimension {d}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input"));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = x - &mean;
    let cov = centered.t().dot(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Array2::zeros((k, d));
    for (row, &c) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(c);
        let pivot = (0..d).fold(0, |m, i| if v[i].abs() > v[m].abs() { i } else { m });
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[[row, i]] = sign * v[i];
        }
    }
    Ok(Pca {
        mean,
        components,
        eigenvalues: order.iter().take(k).map(|&c| eig.eigenvalues[c].max(0.0)).collect(),
        total_variance: eig.eigenvalues.iter().map(|e| e.max(0.0)).sum(),
    })
}

pub fn pca_transform(x: &Array2<f64>, basis: &Pca) -> Result<Array2<f64>> {
    basis.transform(x)
}
