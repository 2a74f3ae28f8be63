//! Kernel PCA on a precomputed Gram matrix.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::GramEstimate;
use crate::error::{Error, Result};

const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpcaProjection {
    pub components: usize,
    /// Leading eigenvalues of the centered Gram, descending.
    pub eigenvalues: Vec<f64>,
    /// `train_size × components`, row-major: `v_k / sqrt(λ_k)`, or zero
    /// for a vanishing eigenvalue.
    pub coefficients: Vec<f64>,
    pub col_means: Vec<f64>,
    pub total_mean: f64,
    pub train_size: usize,
    /// Coordinates of the training points, `sqrt(λ_k) v_k`.
    pub train_coords: Vec<Vec<f64>>,
}

impl KpcaProjection {
    /// Coordinates of a point given its kernel row against the training set.
    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        let m = self.train_size;
        if row.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: row.len(),
            });
        }
        let row_mean = row.iter().sum::<f64>() / m as f64;
        let mut out = vec![0.0; self.components];
        for (j, &r) in row.iter().enumerate() {
            let centered = r - row_mean - self.col_means[j] + self.total_mean;
            let coef = &self.coefficients[j * self.components..(j + 1) * self.components];
            for (o, c) in out.iter_mut().zip(coef) {
                *o += centered * c;
            }
        }
        Ok(out)
    }
}

/// Double-center the Gram and keep its top `k` eigenpairs.
pub fn fit_kpca(gram: &GramEstimate, k: usize) -> Result<KpcaProjection> {
    let m = gram.size;
    if k == 0 || k >= m {
        return Err(Error::Invalid(format!(
            "{k} components for {m} training points"
        )));
    }
    let mut km = gram.to_matrix();
    let col_means: Vec<f64> = (0..m).map(|j| km.column(j).sum() / m as f64).collect();
    let total_mean = col_means.iter().sum::<f64>() / m as f64;
    for i in 0..m {
        for j in 0..m {
            km[(i, j)] += total_mean - col_means[i] - col_means[j];
        }
    }
    let km = (&km + km.transpose()) * 0.5;
    let eig = SymmetricEigen::new(km);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = &order[..k];

    let eigenvalues: Vec<f64> = top.iter().map(|&c| eig.eigenvalues[c]).collect();
    let mut coefficients = vec![0.0; m * k];
    let mut train_coords = vec![vec![0.0; k]; m];
    for (slot, (&c, &lambda)) in top.iter().zip(&eigenvalues).enumerate() {
        if lambda <= EIGEN_FLOOR {
            continue;
        }
        let root = lambda.sqrt();
        for j in 0..m {
            let v = eig.eigenvectors[(j, c)];
            coefficients[j * k + slot] = v / root;
            train_coords[j][slot] = v * root;
        }
    }
    Ok(KpcaProjection {
        components: k,
        eigenvalues,
        coefficients,
        col_means,
        total_mean,
        train_size: m,
        train_coords,
    })
}
