//! PCA on standardized features, the linear baseline.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::linalg::{sym_eig, EigenSystem, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub q: usize,
    pub mean: Vec<f64>,
    /// Population standard deviation of each feature.
    pub scale: Vec<f64>,
    pub correlation: Matrix,
    pub eigen: EigenSystem,
}

impl PcaModel {
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.eigen.leading_vectors(self.q)
    }

    /// Standardizes `x` with the training moments.
    pub fn standardize(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.cols(),
            });
        }
        let mut z = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                z[(i, j)] = (x[(i, j)] - self.mean[j]) / self.scale[j];
            }
        }
        Ok(z)
    }

    /// `n x q` scores of `x` on the leading directions.
    pub fn scores(&self, x: &Matrix) -> Result<Matrix> {
        self.standardize(x)?.matmul(&Matrix::from_columns(&self.directions())?)
    }
}

/// Eigendecomposition of the correlation matrix of the columns of `x`.
pub fn pca_fit(x: &Matrix, q: usize) -> Result<PcaModel> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 || p < 2 {
        return Err(Error::TooSmall { rows: n, cols: p });
    }
    if q == 0 || q > p {
        return Err(Error::QOutOfRange { q, p });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let nf = n as f64;
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / nf).collect();
    let mut scale = Vec::with_capacity(p);
    for (j, m) in mean.iter().enumerate() {
        let var = (0..n).map(|i| (x[(i, j)] - m) * (x[(i, j)] - m)).sum::<f64>() / nf;
        let sd = libm::sqrt(var);
        if !(sd > 1e-12 * (1.0 + m.abs())) {
            return Err(Error::DegenerateColumn(j));
        }
        scale.push(sd);
    }
    let mut correlation = Matrix::zeros(p, p);
    for a in 0..p {
        correlation[(a, a)] = 1.0;
        for b in a + 1..p {
            let c = (0..n)
                .map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]))
                .sum::<f64>()
                / (nf * scale[a] * scale[b]);
            correlation[(a, b)] = c;
            correlation[(b, a)] = c;
        }
    }
    let eigen = sym_eig(&correlation)?;
    Ok(PcaModel {
        q,
        mean,
        scale,
        correlation,
        eigen,
    })
}

/// Covariance PCA (no standardization): `n x q` scores of the centered data
/// on the top `q` eigenvectors of its covariance. Unlike [`pca_fit`] this
/// preserves Euclidean geometry up to the discarded components.
pub fn covariance_scores(x: &Matrix, q: usize) -> Result<Matrix> {
    let (n, p) = (x.rows(), x.cols());
    if q == 0 || q > p {
        return Err(Error::QOutOfRange { q, p });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut centered = x.clone();
    for j in 0..p {
        let m = (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= m;
        }
    }
    let cov = centered.transpose().matmul(&centered)?;
    let eigen = sym_eig(&cov)?;
    centered.matmul(&Matrix::from_columns(&eigen.leading_vectors(q))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn perfectly_correlated_pair() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        assert!((m.eigen.values[0] - 2.0).abs() < 1e-12);
        assert!(m.eigen.values[1].abs() < 1e-12);
        assert!((m.correlation[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_rejected() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(pca_fit(&x, 1), Err(Error::DegenerateColumn(1)));
    }

    #[test]
    fn scores_have_eigenvalue_variance() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.3, 2.0],
            vec![-0.5, 1.1, 0.0],
            vec![2.2, -0.7, 1.5],
            vec![0.1, 0.4, -1.0],
            vec![1.7, 1.9, 0.6],
        ])
        .unwrap();
        let m = pca_fit(&x, 2).unwrap();
        let s = m.scores(&x).unwrap();
        for r in 0..2 {
            let var = (0..5).map(|i| s[(i, r)] * s[(i, r)]).sum::<f64>() / 5.0;
            assert!((var - m.eigen.values[r]).abs() < 1e-10);
        }
    }
}
