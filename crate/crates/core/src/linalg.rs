//! Dense row-major matrices, a deterministic symmetric eigensolver and Ky Fan
//! norms.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds an `n x columns.len()` matrix from column vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: col.len(),
                });
            }
            for (i, &x) in col.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate().take(self.rows) {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest `|a_ij - a_ji|`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max(libm::fabs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Eigen-decomposition of a symmetric matrix.
///
/// `values` are non-increasing; `vectors` holds the matching orthonormal
/// eigenvectors as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenSystem {
    pub fn vector(&self, r: usize) -> Vec<f64> {
        self.vectors.column(r)
    }

    /// The first `q` eigenvectors.
    pub fn leading_vectors(&self, q: usize) -> Vec<Vec<f64>> {
        (0..q).map(|r| self.vector(r)).collect()
    }

    /// True when each of the leading `q` eigenvalues is separated from its
    /// successor by at least [`DEGENERACY_GAP`].
    pub fn top_simple(&self, q: usize) -> bool {
        let last = q.min(self.values.len().saturating_sub(1));
        (0..last).all(|r| self.values[r] - self.values[r + 1] >= DEGENERACY_GAP)
    }
}

/// Symmetric eigen-decomposition with a reproducible output convention.
///
/// The input is symmetrized by averaging with its transpose. Eigenvalues come
/// back in descending order, each eigenvector has its largest-magnitude entry
/// positive (earliest index on ties), and within clusters of eigenvalues closer
/// than [`DEGENERACY_GAP`] the vectors are ordered by first component,
/// descending. Householder tridiagonalization followed by implicit QL.
pub fn sym_eig(a: &Matrix) -> Result<EigenSystem> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(EigenSystem {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }

    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            v[(i, j)] = 0.5 * (a[(i, j)] + a[(j, i)]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(x.cmp(&y)));
    let values: Vec<f64> = order.iter().map(|&k| d[k]).collect();
    let mut columns: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let mut col = v.column(k);
            fix_sign(&mut col);
            col
        })
        .collect();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] < DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            columns[start..end].sort_by(|x, y| y[0].total_cmp(&x[0]));
        }
        start = end;
    }

    Ok(EigenSystem {
        values,
        vectors: Matrix::from_columns(&columns)?,
    })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if libm::fabs(*x) > libm::fabs(v[best]) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

// Householder reduction to tridiagonal form (EISPACK tred2).
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for x in d.iter().take(i) {
            scale += libm::fabs(*x);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for x in d.iter_mut().take(i) {
                *x /= scale;
                h += *x * *x;
            }
            let f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in e.iter_mut().take(i) {
                *x = 0.0;
            }
            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal form (EISPACK tql2).
fn ql_implicit(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(libm::fabs(d[l]) + libm::fabs(e[l]));
        let mut m = l;
        while m < n {
            if libm::fabs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d.iter_mut().skip(l + 2) {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if libm::fabs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Covariance matrix of zero-mean unit-variance transformed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CovarianceMatrix(Matrix);

impl CovarianceMatrix {
    pub fn new(k: Matrix) -> Self {
        Self(k)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn p(&self) -> usize {
        self.0.rows()
    }

    /// Checks symmetry (1e-10), unit diagonal (1e-9), trace p (1e-8) and
    /// smallest eigenvalue at least -1e-8.
    pub fn check(&self) -> core::result::Result<(), &'static str> {
        let k = &self.0;
        if k.asymmetry() > 1e-10 {
            return Err("not symmetric");
        }
        let p = k.rows();
        if (0..p).any(|i| libm::fabs(k[(i, i)] - 1.0) > 1e-9) {
            return Err("diagonal differs from one");
        }
        if libm::fabs(k.trace() - p as f64) > 1e-8 {
            return Err("trace differs from p");
        }
        match sym_eig(k) {
            Ok(es) if es.values.last().is_none_or(|&l| l >= -1e-8) => Ok(()),
            Ok(_) => Err("negative eigenvalue"),
            Err(_) => Err("eigendecomposition failed"),
        }
    }
}

/// Sum of the first `q` entries of a descending eigenvalue list.
pub fn ky_fan(values: &[f64], q: usize) -> Result<f64> {
    if q == 0 || q > values.len() {
        return Err(Error::QOutOfRange {
            q,
            p: values.len(),
        });
    }
    Ok(values[..q].iter().sum())
}

/// Cholesky factor `L` with `A = L Lᵀ`; fails for matrices that are not
/// (numerically) positive semidefinite. Zero pivots are allowed.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let scale = (0..n).map(|i| libm::fabs(a[(i, i)])).fold(0.0, f64::max);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag < -1e-12 * scale.max(1.0) {
            return Err(Error::NotPositiveSemidefinite);
        }
        let ljj = libm::sqrt(diag.max(0.0));
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if ljj > 1e-14 {
                s / ljj
            } else if libm::fabs(s) > 1e-10 {
                return Err(Error::NotPositiveSemidefinite);
            } else {
                0.0
            };
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(es: &EigenSystem) -> Matrix {
        let n = es.values.len();
        let mut out = Matrix::zeros(n, n);
        for r in 0..n {
            let u = es.vector(r);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += es.values[r] * u[i] * u[j];
                }
            }
        }
        out
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let es = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(es.values, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let es = sym_eig(&a).unwrap();
        assert!((es.values[0] - 1.5).abs() < 1e-14);
        assert!((es.values[1] - 0.5).abs() < 1e-14);
        let u = es.vector(0);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((u[0] - h).abs() < 1e-14 && (u[1] - h).abs() < 1e-14);
    }

    #[test]
    fn all_ones_is_rank_one() {
        let a = Matrix::from_rows(&[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let es = sym_eig(&a).unwrap();
        assert!((es.values[0] - 3.0).abs() < 1e-13);
        assert!(es.values[1].abs() < 1e-13 && es.values[2].abs() < 1e-13);
        assert!((ky_fan(&es.values, 1).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert_eq!(sym_eig(&a), Err(Error::NonFinite));
    }

    #[test]
    fn sign_convention_and_reconstruction() {
        let a = Matrix::from_rows(&[
            vec![4.0, -2.0, 0.5, 0.1],
            vec![-2.0, 3.0, -0.3, 0.0],
            vec![0.5, -0.3, 1.0, 0.7],
            vec![0.1, 0.0, 0.7, 2.0],
        ])
        .unwrap();
        let es = sym_eig(&a).unwrap();
        assert!(reconstruct(&es).max_abs_diff(&a) < 1e-12);
        for r in 0..4 {
            let u = es.vector(r);
            let big = u.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
        assert!(es.values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn ky_fan_values() {
        assert_eq!(ky_fan(&[1.0, 1.0, 1.0], 2).unwrap(), 2.0);
        assert_eq!(ky_fan(&[1.5, 0.5], 1).unwrap(), 1.5);
        assert_eq!(ky_fan(&[1.0, 1.0], 3), Err(Error::QOutOfRange { q: 3, p: 2 }));
        assert_eq!(ky_fan(&[1.0, 1.0], 0), Err(Error::QOutOfRange { q: 0, p: 2 }));
    }

    #[test]
    fn cholesky_detects_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(cholesky(&a), Err(Error::NotPositiveSemidefinite));
        let b = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let l = cholesky(&b).unwrap();
        assert!(l.matmul(&l.transpose()).unwrap().max_abs_diff(&b) < 1e-14);
    }
}
