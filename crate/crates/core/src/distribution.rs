//! Marginal and pairwise distributions of discrete variables and their
//! normalized form, the Q-matrix.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Tolerance on sums of freshly constructed probability tables.
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance on quantities obtained after further arithmetic.
pub const ARITHMETIC_TOL: f64 = 1e-9;

/// A distribution over a finite alphabet with strictly positive masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDist {
    probs: Vec<f64>,
    sqrt_probs: Vec<f64>,
}

impl MarginalDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::InvalidArgument(
                "marginal probabilities must lie in (0, 1]".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if libm::fabs(total - 1.0) > CONSTRUCTION_TOL {
            return Err(Error::InvalidArgument("marginal does not sum to one".into()));
        }
        let sqrt_probs = probs.iter().map(|&x| libm::sqrt(x)).collect();
        Ok(Self { probs, sqrt_probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sqrt_probs(&self) -> &[f64] {
        &self.sqrt_probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Joint distribution of two discrete variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseJoint {
    table: Matrix,
}

impl PairwiseJoint {
    pub fn new(table: Matrix) -> Result<Self> {
        if table.as_slice().iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("joint probabilities must be non-negative".into()));
        }
        let total: f64 = table.as_slice().iter().sum();
        if libm::fabs(total - 1.0) > CONSTRUCTION_TOL {
            return Err(Error::InvalidArgument("joint does not sum to one".into()));
        }
        Ok(Self { table })
    }

    pub fn table(&self) -> &Matrix {
        &self.table
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.table.rows()).map(|i| self.table.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.table.cols()];
        for i in 0..self.table.rows() {
            for (o, x) in out.iter_mut().zip(self.table.row(i)) {
                *o += x;
            }
        }
        out
    }
}

/// `Q(j, j') = P(j, j') / sqrt(P_i(j) P_i'(j'))`.
///
/// Its largest singular value is 1 with singular vectors `sqrt(p_i)` and
/// `sqrt(p_i')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QMatrix {
    m: Matrix,
}

impl QMatrix {
    pub fn identity(k: usize) -> Self {
        Self { m: Matrix::identity(k) }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn transpose(&self) -> QMatrix {
        QMatrix { m: self.m.transpose() }
    }

    /// `Q a` for a coefficient vector of the column variable.
    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        self.m.mul_vec(a)
    }
}

/// Empirical distribution of discrete column `i`. Symbols that never occur
/// are dropped, so indices refer to the observed symbols in code order.
pub fn empirical_marginal(data: &DataMatrix, i: usize) -> Result<MarginalDist> {
    let (counts, _) = symbol_counts(data, i)?;
    let n = data.n() as f64;
    MarginalDist::new(counts.into_iter().filter(|&c| c > 0).map(|c| c as f64 / n).collect())
}

/// Empirical joint of discrete columns `i` and `i2`, with zero-count
/// symbols of either variable dropped as in [`empirical_marginal`].
pub fn empirical_pairwise(data: &DataMatrix, i: usize, i2: usize) -> Result<PairwiseJoint> {
    let (ci, map_i) = symbol_counts(data, i)?;
    let (cj, map_j) = symbol_counts(data, i2)?;
    let ki = ci.iter().filter(|&&c| c > 0).count();
    let kj = cj.iter().filter(|&&c| c > 0).count();
    let mut counts = vec![0usize; ki * kj];
    for (&a, &b) in data.codes(i)?.iter().zip(data.codes(i2)?) {
        counts[map_i[a as usize] * kj + map_j[b as usize]] += 1;
    }
    let n = data.n() as f64;
    PairwiseJoint::new(Matrix::from_row_major(
        ki,
        kj,
        counts.into_iter().map(|c| c as f64 / n).collect(),
    )?)
}

// Counts per symbol code, and the map from code to pruned index.
fn symbol_counts(data: &DataMatrix, i: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let codes = data.codes(i)?;
    let k = data.schema()[i].alphabet_size().unwrap_or(0);
    let mut counts = vec![0usize; k + 1];
    for &c in codes {
        counts[(c as usize).min(k)] += 1;
    }
    if counts[k] > 0 {
        return Err(Error::SchemaMismatch {
            column: i,
            reason: "unseen symbol in training data".into(),
        });
    }
    counts.truncate(k);
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for (s, &c) in counts.iter().enumerate() {
        if c > 0 {
            map[s] = next;
            next += 1;
        }
    }
    Ok((counts, map))
}

/// Normalizes a joint table by the square roots of its marginals.
pub fn q_matrix(joint: &PairwiseJoint, pi: &MarginalDist, pi2: &MarginalDist) -> Result<QMatrix> {
    let t = joint.table();
    if t.rows() != pi.len() || t.cols() != pi2.len() {
        return Err(Error::DimensionMismatch {
            expected: pi.len() * pi2.len(),
            found: t.rows() * t.cols(),
        });
    }
    let dev_rows = joint
        .row_sums()
        .iter()
        .zip(pi.probs())
        .map(|(a, b)| libm::fabs(a - b))
        .fold(0.0, f64::max);
    let dev_cols = joint
        .col_sums()
        .iter()
        .zip(pi2.probs())
        .map(|(a, b)| libm::fabs(a - b))
        .fold(0.0, f64::max);
    let dev = dev_rows.max(dev_cols);
    if dev > ARITHMETIC_TOL {
        return Err(Error::InconsistentMarginals(dev));
    }
    let mut m = Matrix::zeros(t.rows(), t.cols());
    for j in 0..t.rows() {
        for k in 0..t.cols() {
            m[(j, k)] = t[(j, k)] / (pi.sqrt_probs()[j] * pi2.sqrt_probs()[k]);
        }
    }
    Ok(QMatrix { m })
}
