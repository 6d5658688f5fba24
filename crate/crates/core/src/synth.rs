//! Seeded synthetic data: explicit joint distributions, block-correlated
//! discrete data hidden behind random value maps, low-rank continuous data
//! behind monotone maps, and a brute-force solver for three ternary variables.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::continuous::{equal_frequency_knots, eval_pwl, PiecewiseLinearFn};
use crate::data::{Cell, Column, ColumnSchema, DataMatrix, Domain};
use crate::discrete::{fallback_unit, DistributionModel};
use crate::distribution::{MarginalDist, PairwiseJoint};
use crate::linalg::{cholesky, Matrix};
use crate::pca::covariance_scores;
use crate::rng::{streams, sub_rng};
use crate::{Error, Result};

/// A full joint distribution over a product of finite alphabets, stored
/// row-major with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&k| k < 2) {
            return Err(Error::InvalidArgument("need at least two variables with two symbols".into()));
        }
        let cells: usize = sizes.iter().product();
        if probs.len() != cells {
            return Err(Error::DimensionMismatch {
                expected: cells,
                found: probs.len(),
            });
        }
        if probs.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument("negative or non-finite probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if libm::fabs(total - 1.0) > 1e-9 {
            return Err(Error::InvalidArgument("joint does not sum to one".into()));
        }
        let joint = Self { sizes, probs };
        for i in 0..joint.p() {
            if joint.raw_marginal(i).iter().any(|&m| m <= 0.0) {
                return Err(Error::InvalidArgument("every symbol needs positive mass".into()));
            }
        }
        Ok(joint)
    }

    /// Flat Dirichlet draw over all cells of the product alphabet.
    pub fn random_dirichlet(sizes: &[usize], seed: u64) -> Result<Self> {
        let cells: usize = sizes.iter().product();
        let mut rng = sub_rng(seed, streams::JOINT, 0);
        let mut probs: Vec<f64> = (0..cells).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|x| *x /= total);
        Self::new(sizes.to_vec(), probs)
    }

    /// Product of the given marginals.
    pub fn independent(marginals: &[Vec<f64>]) -> Result<Self> {
        let sizes: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut probs = vec![1.0];
        for m in marginals {
            probs = probs.iter().flat_map(|&a| m.iter().map(move |&b| a * b)).collect();
        }
        Self::new(sizes, probs)
    }

    /// `p` copies of one uniform variable on `k` symbols.
    pub fn strictly_dependent(k: usize, p: usize) -> Result<Self> {
        let sizes = vec![k; p];
        let cells: usize = sizes.iter().product();
        let mut probs = vec![0.0; cells];
        for s in 0..k {
            let idx = (0..p).fold(0, |acc, _| acc * k + s);
            probs[idx] = 1.0 / k as f64;
        }
        Self::new(sizes, probs)
    }

    pub fn p(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    // Symbol of variable `i` in flat cell `idx`.
    fn symbol(&self, idx: usize, i: usize) -> usize {
        let stride: usize = self.sizes[i + 1..].iter().product();
        (idx / stride) % self.sizes[i]
    }

    fn raw_marginal(&self, i: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.sizes[i]];
        for (idx, &pr) in self.probs.iter().enumerate() {
            m[self.symbol(idx, i)] += pr;
        }
        m
    }

    pub fn marginal(&self, i: usize) -> Result<MarginalDist> {
        let m = self.raw_marginal(i);
        let total: f64 = m.iter().sum();
        MarginalDist::new(m.into_iter().map(|x| x / total).collect())
    }

    pub fn pairwise(&self, i: usize, j: usize) -> Result<PairwiseJoint> {
        let mut t = Matrix::zeros(self.sizes[i], self.sizes[j]);
        for (idx, &pr) in self.probs.iter().enumerate() {
            t[(self.symbol(idx, i), self.symbol(idx, j))] += pr;
        }
        let total: f64 = t.as_slice().iter().sum();
        let rows = t.rows();
        let cols = t.cols();
        let scaled = t.as_slice().iter().map(|x| x / total).collect();
        PairwiseJoint::new(Matrix::from_row_major(rows, cols, scaled)?)
    }

    /// Pairwise model with the same marginals and pairwise joints.
    pub fn model(&self) -> Result<DistributionModel> {
        let marginals = (0..self.p()).map(|i| self.marginal(i)).collect::<Result<Vec<_>>>()?;
        DistributionModel::from_pairwise(marginals, |i, j| self.pairwise(i, j))
    }

    /// `n` independent draws as a discrete table with labels `1..=k`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &pr in &self.probs {
            acc += pr;
            cdf.push(acc);
        }
        let last = self.probs.iter().rposition(|&x| x > 0.0).expect("positive mass");
        let mut columns = vec![Vec::with_capacity(n); self.p()];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(last);
            for (i, col) in columns.iter_mut().enumerate() {
                col.push(self.symbol(idx, i) as u32);
            }
        }
        let schema = self
            .sizes
            .iter()
            .enumerate()
            .map(|(j, &k)| ColumnSchema {
                name: alloc::format!("x{}", j + 1),
                domain: Domain::Discrete {
                    alphabet: (1..=k).map(|s| Cell::Number(s as f64)).collect(),
                },
            })
            .collect();
        DataMatrix::new(columns.into_iter().map(Column::Discrete).collect(), schema)
    }
}

/// Correlation matrix of `A Aᵀ` for a `p x p` standard normal `A`.
pub fn random_correlation(p: usize, seed: u64) -> Result<Matrix> {
    let mut rng = sub_rng(seed, streams::CORRELATION, 0);
    let a: Vec<f64> = (0..p * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let a = Matrix::from_row_major(p, p, a)?;
    let s = a.matmul(&a.transpose())?;
    let mut c = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            c[(i, j)] = if i == j { 1.0 } else { s[(i, j)] / libm::sqrt(s[(i, i)] * s[(j, j)]) };
        }
    }
    Ok(c)
}

/// `n` draws of a zero-mean Gaussian vector with the given covariance, as a
/// continuous table.
pub fn gen_gaussian(n: usize, covariance: &Matrix, seed: u64) -> Result<DataMatrix> {
    let p = covariance.rows();
    let chol = cholesky(covariance)?;
    let mut rng = sub_rng(seed, streams::GAUSS, 0);
    let mut columns = vec![Vec::with_capacity(n); p];
    let mut g = vec![0.0; p];
    for _ in 0..n {
        g.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
        for (i, col) in columns.iter_mut().enumerate() {
            col.push(chol.row(i).iter().zip(&g).map(|(l, z)| l * z).sum());
        }
    }
    DataMatrix::from_continuous(columns)
}

/// A group of `size` Gaussian variables with common pairwise correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub size: usize,
    pub correlation: f64,
}

/// Five blocks of ten variables with correlations from 0.8 down to 0.4.
pub fn default_blocks() -> Vec<Block> {
    [0.8, 0.7, 0.6, 0.5, 0.4]
        .iter()
        .map(|&correlation| Block { size: 10, correlation })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiscrete {
    /// Transformed values; discrete columns whose labels are the values.
    pub observed: DataMatrix,
    /// Quantization cells before the value maps, labels `1..=levels`.
    pub latent: DataMatrix,
    /// `tables[j][c]` is the observed value of cell `c` in column `j`.
    pub tables: Vec<Vec<f64>>,
}

/// Block-correlated Gaussian data, quantized into `levels` equal-frequency
/// cells per column, then passed through a random permutation of cell values,
/// standardized on the sample.
pub fn gen_block_discrete(n: usize, blocks: &[Block], levels: usize, seed: u64) -> Result<BlockDiscrete> {
    let p: usize = blocks.iter().map(|b| b.size).sum();
    if p < 2 || levels < 2 || n < levels {
        return Err(Error::InvalidArgument("need p >= 2, levels >= 2 and n >= levels".into()));
    }
    if blocks.iter().any(|b| !(b.correlation > -1.0 && b.correlation < 1.0)) {
        return Err(Error::InvalidArgument("block correlations must lie in (-1, 1)".into()));
    }
    let mut cov = Matrix::identity(p);
    let mut start = 0;
    for b in blocks {
        for i in start..start + b.size {
            for j in start..start + b.size {
                if i != j {
                    cov[(i, j)] = b.correlation;
                }
            }
        }
        start += b.size;
    }
    let chol = cholesky(&cov)?;

    let mut rng = sub_rng(seed, streams::BLOCK_GAUSS, 0);
    let mut gauss = vec![vec![0.0; n]; p];
    let mut g = vec![0.0; p];
    for s in 0..n {
        g.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
        for (i, col) in gauss.iter_mut().enumerate() {
            col[s] = chol.row(i).iter().zip(&g).map(|(l, z)| l * z).sum();
        }
    }

    let mut latent = Vec::with_capacity(p);
    let mut observed = Vec::with_capacity(p);
    let mut tables = Vec::with_capacity(p);
    let mut schema = Vec::with_capacity(p);
    for (j, col) in gauss.iter().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut codes = vec![0u32; n];
        for (rank, &s) in order.iter().enumerate() {
            codes[s] = (rank * levels / n) as u32;
        }
        let mut perm: Vec<f64> = (0..levels).map(|c| c as f64).collect();
        perm.shuffle(&mut sub_rng(seed, streams::BLOCK_PERM, j as u64));
        let mut counts = vec![0usize; levels];
        codes.iter().for_each(|&c| counts[c as usize] += 1);
        let mean: f64 = perm.iter().zip(&counts).map(|(v, &c)| v * c as f64).sum::<f64>() / n as f64;
        let var: f64 = perm
            .iter()
            .zip(&counts)
            .map(|(v, &c)| (v - mean) * (v - mean) * c as f64)
            .sum::<f64>()
            / n as f64;
        let sd = libm::sqrt(var);
        let table: Vec<f64> = perm.iter().map(|v| (v - mean) / sd).collect();
        schema.push(ColumnSchema {
            name: alloc::format!("x{}", j + 1),
            domain: Domain::Discrete {
                alphabet: table.iter().map(|&v| Cell::Number(v)).collect(),
            },
        });
        observed.push(Column::Discrete(codes.clone()));
        latent.push(codes);
        tables.push(table);
    }
    Ok(BlockDiscrete {
        observed: DataMatrix::new(observed, schema)?,
        latent: DataMatrix::from_codes(latent)?,
        tables,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowRankTransform {
    /// Each column through one of `x`, `x³`, `x⁵`.
    Polynomial,
    /// Each column through a random increasing piecewise-linear map.
    Piecewise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub observed: DataMatrix,
    /// Columns of the latent matrix before the observation maps.
    pub latent_matrix: Matrix,
    /// `n x q` coordinates of the noiseless low-rank matrix on its principal
    /// axes; pairwise distances here are the reference geometry.
    pub coordinates: Matrix,
}

/// Rank-`q` latent matrix `U Vᵀ` (plus standard Gaussian noise when `noise`)
/// observed through a random strictly increasing map per column.
pub fn gen_lowrank_continuous(
    n: usize,
    p: usize,
    q: usize,
    noise: bool,
    transform: LowRankTransform,
    seed: u64,
) -> Result<LowRank> {
    if q == 0 || q >= p {
        return Err(Error::QOutOfRange { q, p });
    }
    if n < 20 {
        return Err(Error::TooSmall { rows: n, cols: p });
    }
    let mut rng = sub_rng(seed, streams::LOWRANK, 0);
    let mut normal = |rows: usize, cols: usize| {
        let v: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        Matrix::from_row_major(rows, cols, v)
    };
    let u = normal(n, q)?;
    let v = normal(p, q)?;
    let clean = u.matmul(&v.transpose())?;
    let coordinates = covariance_scores(&clean, q)?;
    let mut latent = clean;
    if noise {
        let e = normal(n, p)?;
        for i in 0..n {
            for j in 0..p {
                latent[(i, j)] += e[(i, j)];
            }
        }
    }

    let mut map_rng = sub_rng(seed, streams::LOWRANK_MAP, 0);
    let increments = Exp::new(100.0).expect("positive rate");
    let mut columns = Vec::with_capacity(p);
    for j in 0..p {
        let x = latent.column(j);
        let y: Vec<f64> = match transform {
            LowRankTransform::Polynomial => {
                let power = [1, 3, 5][map_rng.random_range(0..3)];
                x.iter().map(|&t| libm::pow(t, power as f64)).collect()
            }
            LowRankTransform::Piecewise => {
                let mut sorted = x.clone();
                sorted.sort_by(f64::total_cmp);
                let mut xs = vec![sorted[0]];
                xs.extend(equal_frequency_knots(&sorted, 10)?.thresholds);
                xs.push(sorted[n - 1]);
                xs.dedup();
                let mut ws = Vec::with_capacity(xs.len());
                let mut level = 0.0;
                for k in 0..xs.len() {
                    if k > 0 {
                        level += increments.sample(&mut map_rng);
                    }
                    ws.push(level);
                }
                let f = PiecewiseLinearFn::new(xs, ws)?;
                x.iter().map(|&t| eval_pwl(&f, t)).collect()
            }
        };
        columns.push(y);
    }
    Ok(LowRank {
        observed: DataMatrix::from_continuous(columns)?,
        latent_matrix: latent,
        coordinates,
    })
}

/// Result of the brute-force search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub value: f64,
    /// Best transform table `φ_i(symbol)` for each variable.
    pub tables: Vec<Vec<f64>>,
}

pub const MIN_ORACLE_GRID: usize = 36;

/// Exhaustive search over three ternary variables.
///
/// Each feasible transform is a point on a circle, parameterized by an angle
/// in `[0, π)` (the sign of a transform does not change the spectrum). The
/// Ky Fan value is evaluated on the full `grid³` product of angles with the
/// closed-form eigenvalues of a 3x3 unit-diagonal matrix.
pub fn oracle_ternary(model: &DistributionModel, q: usize, grid: usize) -> Result<OracleSolution> {
    if model.p() != 3 || model.alphabet_sizes().iter().any(|&k| k != 3) {
        return Err(Error::InvalidArgument("oracle needs three ternary variables".into()));
    }
    if !(1..=3).contains(&q) {
        return Err(Error::QOutOfRange { q, p: 3 });
    }
    if grid < MIN_ORACLE_GRID {
        return Err(Error::InvalidArgument("oracle grid must have at least 36 steps".into()));
    }
    // circle[i][k]: coefficient vector of variable i at angle k
    let circle: Vec<Vec<[f64; 3]>> = (0..3)
        .map(|i| {
            let s = model.marginal(i).sqrt_probs();
            let e1 = fallback_unit(s);
            let e2 = [
                s[1] * e1[2] - s[2] * e1[1],
                s[2] * e1[0] - s[0] * e1[2],
                s[0] * e1[1] - s[1] * e1[0],
            ];
            (0..grid)
                .map(|k| {
                    let (sn, cs) = libm::sincos(PI * k as f64 / grid as f64);
                    [cs * e1[0] + sn * e2[0], cs * e1[1] + sn * e2[1], cs * e1[2] + sn * e2[2]]
                })
                .collect()
        })
        .collect();
    let cross = |i: usize, j: usize| -> Vec<f64> {
        let qm = model.q(i, j);
        let mut t = vec![0.0; grid * grid];
        for (k, a) in circle[i].iter().enumerate() {
            for (l, b) in circle[j].iter().enumerate() {
                let qb = qm.apply(b);
                t[k * grid + l] = a.iter().zip(&qb).map(|(x, y)| x * y).sum();
            }
        }
        t
    };
    let (k12, k13, k23) = (cross(0, 1), cross(0, 2), cross(1, 2));

    let mut best = (f64::NEG_INFINITY, [0usize; 3]);
    for a in 0..grid {
        for b in 0..grid {
            let b12 = k12[a * grid + b];
            for c in 0..grid {
                let v = unit_diag_ky_fan(b12, k13[a * grid + c], k23[b * grid + c], q);
                if v > best.0 {
                    best = (v, [a, b, c]);
                }
            }
        }
    }
    let tables = (0..3)
        .map(|i| {
            let s = model.marginal(i).sqrt_probs();
            circle[i][best.1[i]].iter().zip(s).map(|(a, r)| a / r).collect()
        })
        .collect();
    Ok(OracleSolution { value: best.0, tables })
}

// Sum of the q largest eigenvalues of [[1, x, y], [x, 1, z], [y, z, 1]].
fn unit_diag_ky_fan(x: f64, y: f64, z: f64, q: usize) -> f64 {
    if q == 3 {
        return 3.0;
    }
    // eigenvalues of the off-diagonal part solve t³ - s t - 2xyz = 0
    let s = x * x + y * y + z * z;
    if s <= 0.0 {
        return q as f64;
    }
    let m = libm::sqrt(s / 3.0);
    let arg = (3.0 * x * y * z / s * libm::sqrt(3.0 / s)).clamp(-1.0, 1.0);
    let phi = libm::acos(arg) / 3.0;
    if q == 1 {
        1.0 + 2.0 * m * libm::cos(phi)
    } else {
        2.0 - 2.0 * m * libm::cos(phi + 2.0 * PI / 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ky_fan, sym_eig};

    #[test]
    fn closed_form_matches_eigensolver() {
        for &(x, y, z) in &[(0.3, -0.2, 0.5), (0.9, 0.8, 0.7), (0.0, 0.0, 0.4), (-0.6, 0.6, -0.6)] {
            let k = Matrix::from_rows(&[vec![1.0, x, y], vec![x, 1.0, z], vec![y, z, 1.0]]).unwrap();
            let e = sym_eig(&k).unwrap();
            for q in 1..=3 {
                let diff = (unit_diag_ky_fan(x, y, z, q) - ky_fan(&e.values, q).unwrap()).abs();
                // the last case has a repeated root, where the trigonometric
                // form keeps only about half the digits
                assert!(diff < 1e-7, "{x} {y} {z} {q}: {diff}");
            }
        }
    }

    #[test]
    fn joint_marginalizes() {
        let j = JointDistribution::random_dirichlet(&[2, 3, 4], 7).unwrap();
        let pw = j.pairwise(0, 2).unwrap();
        let m0 = j.marginal(0).unwrap();
        for (a, b) in pw.row_sums().iter().zip(m0.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(j.model().is_ok());
    }

    #[test]
    fn oracle_trivial_instances() {
        let ind = JointDistribution::independent(&[vec![0.2, 0.3, 0.5], vec![1.0 / 3.0; 3], vec![0.6, 0.3, 0.1]])
            .unwrap()
            .model()
            .unwrap();
        for q in 1..=3 {
            assert!((oracle_ternary(&ind, q, 36).unwrap().value - q as f64).abs() < 1e-9);
        }
        let dep = JointDistribution::strictly_dependent(3, 3).unwrap().model().unwrap();
        assert!((oracle_ternary(&dep, 1, 36).unwrap().value - 3.0).abs() < 1e-9);
        assert!(oracle_ternary(&dep, 1, 35).is_err());
    }

    #[test]
    fn block_generator_shapes() {
        let b = gen_block_discrete(200, &[Block { size: 3, correlation: 0.5 }], 4, 1).unwrap();
        assert_eq!((b.observed.n(), b.observed.p()), (200, 3));
        assert_eq!(b.latent.schema()[0].alphabet_size(), Some(4));
        let x = b.observed.numeric_matrix();
        let mean: f64 = (0..200).map(|i| x[(i, 0)]).sum::<f64>() / 200.0;
        assert!(mean.abs() < 1e-12);
    }
}
