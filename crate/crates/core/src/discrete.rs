//! MCPCA for finite discrete variables with known (or empirical) pairwise
//! joint distributions.
//!
//! A transform `φ_i` of variable `i` is represented by the coefficient vector
//! `a_i = sqrt(p_i) ∘ φ_i`. Zero mean and unit variance become `a_i ⊥ sqrt(p_i)`
//! and `‖a_i‖ = 1`, and the covariance of the transformed variables is
//! `K(i, i') = a_iᵀ Q_{i,i'} a_{i'}`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bcd::{self, CoordinateState, UPDATE_EPS};
use crate::data::DataMatrix;
use crate::distribution::{
    empirical_marginal, empirical_pairwise, q_matrix, MarginalDist, PairwiseJoint, QMatrix, ARITHMETIC_TOL,
};
use crate::linalg::{dot, ky_fan, norm, sym_eig, CovarianceMatrix, EigenSystem, Matrix};
use crate::restart::{best_index, FitConfig, Init, RestartExecutor, Sequential};
use crate::rng::{streams, sub_rng};
use crate::{Error, Result, Warning};

/// Marginals and all pairwise Q-matrices of `p` discrete variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionModel {
    marginals: Vec<MarginalDist>,
    // p x p grid, row-major; diagonal blocks are identities and
    // qmats[j][i] is the transpose of qmats[i][j].
    qmats: Vec<QMatrix>,
}

impl DistributionModel {
    /// Builds the model from marginals and a source of pairwise joints, which
    /// is queried once for every `i < j`.
    pub fn from_pairwise<F>(marginals: Vec<MarginalDist>, mut joint: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<PairwiseJoint>,
    {
        let p = marginals.len();
        let mut grid: Vec<Option<QMatrix>> = vec![None; p * p];
        for i in 0..p {
            grid[i * p + i] = Some(QMatrix::identity(marginals[i].len()));
            for j in i + 1..p {
                let q = q_matrix(&joint(i, j)?, &marginals[i], &marginals[j])?;
                grid[j * p + i] = Some(q.transpose());
                grid[i * p + j] = Some(q);
            }
        }
        Ok(Self {
            marginals,
            qmats: grid.into_iter().map(|q| q.expect("every block filled")).collect(),
        })
    }

    /// Model of the empirical distribution of an all-discrete table. Symbols
    /// that never occur are dropped.
    pub fn empirical(data: &DataMatrix) -> Result<Self> {
        let marginals = (0..data.p())
            .map(|i| empirical_marginal(data, i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairwise(marginals, |i, j| empirical_pairwise(data, i, j))
    }

    pub fn p(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[MarginalDist] {
        &self.marginals
    }

    pub fn marginal(&self, i: usize) -> &MarginalDist {
        &self.marginals[i]
    }

    pub fn q(&self, i: usize, j: usize) -> &QMatrix {
        &self.qmats[i * self.p() + j]
    }

    pub fn alphabet_sizes(&self) -> Vec<usize> {
        self.marginals.iter().map(MarginalDist::len).collect()
    }
}

/// One coefficient vector per variable, each unit-norm and orthogonal to
/// `sqrt(p_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a: Vec<Vec<f64>>,
}

impl CoefficientSet {
    /// Seeded random feasible point: standard normal entries, projected off
    /// `sqrt(p_i)` and normalized. Variable `i` draws from its own stream.
    pub fn random(marginals: &[MarginalDist], seed: u64, stream: usize) -> Self {
        let a = marginals
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut rng = sub_rng(seed, streams::RANDOM_INIT, ((stream as u64) << 20) ^ i as u64);
                let z: Vec<f64> = (0..m.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                project_and_normalize(z, m.sqrt_probs()).unwrap_or_else(|| fallback_unit(m.sqrt_probs()))
            })
            .collect();
        Self { a }
    }

    /// Coefficients of the transform tables `φ_i` (`a_i = sqrt(p_i) ∘ φ_i`).
    pub fn from_tables(marginals: &[MarginalDist], tables: &[Vec<f64>]) -> Self {
        let a = marginals
            .iter()
            .zip(tables)
            .map(|(m, phi)| m.sqrt_probs().iter().zip(phi).map(|(s, f)| s * f).collect())
            .collect();
        Self { a }
    }

    /// Transform tables `φ_i = a_i / sqrt(p_i)`.
    pub fn to_tables(&self, marginals: &[MarginalDist]) -> Vec<Vec<f64>> {
        self.a
            .iter()
            .zip(marginals)
            .map(|(a, m)| a.iter().zip(m.sqrt_probs()).map(|(x, s)| x / s).collect())
            .collect()
    }

    /// Largest violation of the unit-norm and orthogonality constraints.
    pub fn constraint_violation(&self, marginals: &[MarginalDist]) -> f64 {
        self.a
            .iter()
            .zip(marginals)
            .map(|(a, m)| libm::fabs(norm(a) - 1.0).max(libm::fabs(dot(a, m.sqrt_probs()))))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, model: &DistributionModel) -> Result<()> {
        if self.a.len() != model.p() {
            return Err(Error::DimensionMismatch {
                expected: model.p(),
                found: self.a.len(),
            });
        }
        for (a, m) in self.a.iter().zip(model.marginals()) {
            if a.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    expected: m.len(),
                    found: a.len(),
                });
            }
        }
        if self.constraint_violation(model.marginals()) > ARITHMETIC_TOL {
            return Err(Error::InvalidArgument(
                "coefficients must be unit-norm and orthogonal to sqrt(p)".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn project_and_normalize(mut v: Vec<f64>, sqrt_p: &[f64]) -> Option<Vec<f64>> {
    let c = dot(&v, sqrt_p);
    v.iter_mut().zip(sqrt_p).for_each(|(x, s)| *x -= c * s);
    let nrm = norm(&v);
    (nrm > UPDATE_EPS).then(|| v.into_iter().map(|x| x / nrm).collect())
}

// Feasible unit vector built from the basis vector least aligned with sqrt(p).
pub(crate) fn fallback_unit(sqrt_p: &[f64]) -> Vec<f64> {
    let mut j = 0;
    for (k, s) in sqrt_p.iter().enumerate() {
        if *s < sqrt_p[j] {
            j = k;
        }
    }
    let mut e = vec![0.0; sqrt_p.len()];
    e[j] = 1.0;
    project_and_normalize(e, sqrt_p).expect("alphabets have at least two symbols")
}

/// Block matrix with blocks `R_{i,i'} = Q_{i,i'} - sqrt(p_i) sqrt(p_i')ᵀ`,
/// together with its eigen-decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct RMatrix {
    r: Matrix,
    offsets: Vec<usize>,
    eigen: EigenSystem,
}

impl RMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.r
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eigen
    }

    /// Row range of block `i`.
    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Embeds a block vector into the full dimension, zero elsewhere.
    pub fn pad(&self, i: usize, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.r.rows()];
        out[self.block(i)].copy_from_slice(v);
        out
    }
}

pub fn build_r_matrix(model: &DistributionModel) -> Result<RMatrix> {
    let sizes = model.alphabet_sizes();
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    offsets.push(0);
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let dim = *offsets.last().unwrap();
    let mut r = Matrix::zeros(dim, dim);
    for i in 0..model.p() {
        let si = model.marginal(i).sqrt_probs();
        for j in 0..model.p() {
            let sj = model.marginal(j).sqrt_probs();
            let q = model.q(i, j).matrix();
            for (a, &sa) in si.iter().enumerate() {
                for (b, &sb) in sj.iter().enumerate() {
                    r[(offsets[i] + a, offsets[j] + b)] = q[(a, b)] - sa * sb;
                }
            }
        }
    }
    let eigen = sym_eig(&r)?;
    Ok(RMatrix { r, offsets, eigen })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOneSolution {
    pub coefficients: CoefficientSet,
    /// `λ₁(R)`, the optimal rank-one objective.
    pub value: f64,
    pub warnings: Vec<Warning>,
}

/// Globally optimal coefficients for `q = 1`: the normalized blocks of the
/// leading eigenvector of R.
pub fn rank_one_solution(r: &RMatrix, model: &DistributionModel) -> Result<RankOneSolution> {
    let u = r.eigen.vector(0);
    let mut warnings = Vec::new();
    let a = (0..model.p())
        .map(|i| {
            let block = &u[r.block(i)];
            let nrm = norm(block);
            if nrm < UPDATE_EPS {
                warnings.push(Warning::DegenerateRankOneBlock { variable: i });
                fallback_unit(model.marginal(i).sqrt_probs())
            } else {
                block.iter().map(|x| x / nrm).collect()
            }
        })
        .collect();
    Ok(RankOneSolution {
        coefficients: CoefficientSet { a },
        value: r.eigen.values[0],
        warnings,
    })
}

/// `Σ_{r ≤ q} λ_r(R)`, an upper bound on the q-MCPCA objective.
pub fn ky_fan_upper_bound(r: &RMatrix, q: usize) -> Result<f64> {
    let p = r.offsets.len() - 1;
    if q == 0 || q > p {
        return Err(Error::QOutOfRange { q, p });
    }
    ky_fan(&r.eigen.values, q)
}

/// `K(i, i') = a_iᵀ Q_{i,i'} a_{i'}`.
pub fn population_covariance(model: &DistributionModel, coeffs: &CoefficientSet) -> CovarianceMatrix {
    CovarianceMatrix::new(covariance_of(model, &coeffs.a))
}

fn covariance_of(model: &DistributionModel, a: &[Vec<f64>]) -> Matrix {
    let p = model.p();
    let mut k = Matrix::zeros(p, p);
    for i in 0..p {
        k[(i, i)] = dot(&a[i], &a[i]);
        for j in i + 1..p {
            let v = dot(&a[i], &model.q(i, j).apply(&a[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Outcome of one block coordinate descent run.
#[derive(Debug, Clone, PartialEq)]
pub struct McpcaResult {
    pub coefficients: CoefficientSet,
    pub covariance: CovarianceMatrix,
    pub eigen: EigenSystem,
    /// Leading `q` eigenvectors of the covariance.
    pub directions: Vec<Vec<f64>>,
    /// `ρ_q` after initialization and after every sweep.
    pub objective_trajectory: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<Warning>,
    /// Index of the initialization that produced this result.
    pub restart: usize,
}

impl McpcaResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trajectory.last().expect("trajectory is never empty")
    }
}

struct DistributionState<'a> {
    model: &'a DistributionModel,
    a: Vec<Vec<f64>>,
}

impl CoordinateState for DistributionState<'_> {
    fn p(&self) -> usize {
        self.model.p()
    }

    fn covariance(&self) -> Matrix {
        covariance_of(self.model, &self.a)
    }

    fn update(&mut self, k: usize, v: &[Vec<f64>]) -> bool {
        let mut w = vec![0.0; self.a[k].len()];
        for i in (0..self.p()).filter(|&i| i != k) {
            let c: f64 = v.iter().map(|vr| vr[k] * vr[i]).sum();
            if c == 0.0 {
                continue;
            }
            let qa = self.model.q(k, i).apply(&self.a[i]);
            w.iter_mut().zip(&qa).for_each(|(x, y)| *x += c * y);
        }
        match project_and_normalize(w, self.model.marginal(k).sqrt_probs()) {
            Some(ak) => {
                self.a[k] = ak;
                true
            }
            None => false,
        }
    }
}

/// Runs block coordinate descent from one starting point.
pub fn bcd_run(
    model: &DistributionModel,
    q: usize,
    init: CoefficientSet,
    config: &FitConfig,
) -> Result<McpcaResult> {
    check_q(q, model.p())?;
    init.validate(model)?;
    let mut state = DistributionState { model, a: init.a };
    let trace = bcd::run(&mut state, q, config)?;
    Ok(McpcaResult {
        coefficients: CoefficientSet { a: state.a },
        directions: trace.eigen.leading_vectors(q),
        covariance: trace.covariance,
        eigen: trace.eigen,
        objective_trajectory: trace.trajectory,
        converged: trace.converged,
        iterations: trace.iterations,
        warnings: trace.warnings,
        restart: 0,
    })
}

/// Block coordinate descent with the default restart plan: restart 0 from the
/// rank-one closed form, the rest from seeded random points. Returns the
/// restart with the largest final objective.
pub fn bcd_fit(model: &DistributionModel, q: usize, config: &FitConfig) -> Result<McpcaResult> {
    bcd_fit_with(model, q, config, &Init::plan(config), &Sequential)
}

pub fn bcd_fit_with<E: RestartExecutor>(
    model: &DistributionModel,
    q: usize,
    config: &FitConfig,
    inits: &[Init],
    executor: &E,
) -> Result<McpcaResult> {
    check_q(q, model.p())?;
    if inits.is_empty() {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let rank_one = needs_rank_one(inits)
        .then(|| build_r_matrix(model).and_then(|r| rank_one_solution(&r, model)))
        .transpose()?;
    let runs = executor.run(inits.len(), |idx| {
        let (start, mut warnings) = resolve_init(&inits[idx], model.marginals(), rank_one.as_ref(), config.seed);
        let mut res = bcd_run(model, q, start, config)?;
        res.restart = idx;
        warnings.append(&mut res.warnings);
        res.warnings = warnings;
        Ok(res)
    });
    pick_best(runs)
}

pub(crate) fn pick_best(runs: Vec<Result<McpcaResult>>) -> Result<McpcaResult> {
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let objectives: Vec<f64> = runs.iter().map(McpcaResult::objective).collect();
    let best = best_index(&objectives).expect("non-empty restart list");
    Ok(runs.into_iter().nth(best).expect("index in range"))
}

pub(crate) fn needs_rank_one(inits: &[Init]) -> bool {
    inits.iter().any(|i| matches!(i, Init::RankOne))
}

pub(crate) fn resolve_init(
    init: &Init,
    marginals: &[MarginalDist],
    rank_one: Option<&RankOneSolution>,
    seed: u64,
) -> (CoefficientSet, Vec<Warning>) {
    match init {
        Init::RankOne => {
            let r1 = rank_one.expect("rank-one solution computed when planned");
            (r1.coefficients.clone(), r1.warnings.clone())
        }
        Init::Random { stream } => (CoefficientSet::random(marginals, seed, *stream), Vec::new()),
        Init::Given(c) => (c.clone(), Vec::new()),
    }
}

pub(crate) fn check_q(q: usize, p: usize) -> Result<()> {
    if q == 0 || q > p {
        return Err(Error::QOutOfRange { q, p });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn independent(probs: &[&[f64]]) -> DistributionModel {
        let marginals: Vec<MarginalDist> = probs.iter().map(|p| MarginalDist::new(p.to_vec()).unwrap()).collect();
        let m2 = marginals.clone();
        DistributionModel::from_pairwise(marginals, |i, j| {
            let (a, b) = (m2[i].probs(), m2[j].probs());
            let mut t = Matrix::zeros(a.len(), b.len());
            for (x, pa) in a.iter().enumerate() {
                for (y, pb) in b.iter().enumerate() {
                    t[(x, y)] = pa * pb;
                }
            }
            PairwiseJoint::new(t)
        })
        .unwrap()
    }

    fn identical_binaries(p: usize) -> DistributionModel {
        let m = MarginalDist::new(vec![0.5, 0.5]).unwrap();
        DistributionModel::from_pairwise(vec![m; p], |_, _| {
            PairwiseJoint::new(Matrix::from_row_major(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap())
        })
        .unwrap()
    }

    #[test]
    fn independent_r_is_block_projection() {
        let model = independent(&[&[0.2, 0.8], &[0.1, 0.3, 0.6]]);
        let r = build_r_matrix(&model).unwrap();
        for i in 0..2 {
            let s = model.marginal(i).sqrt_probs();
            for (a, ra) in r.block(i).enumerate() {
                for (b, rb) in r.block(i).enumerate() {
                    let expect = if a == b { 1.0 } else { 0.0 } - s[a] * s[b];
                    assert!((r.matrix()[(ra, rb)] - expect).abs() < 1e-15);
                }
            }
        }
        assert!(r.matrix()[(0, 3)].abs() < 1e-15);
        assert!((r.eigen().values[0] - 1.0).abs() < 1e-12);
        assert!((ky_fan_upper_bound(&r, 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_binaries_off_diagonal_block() {
        let r = build_r_matrix(&identical_binaries(2)).unwrap();
        let m = r.matrix();
        assert!((m[(0, 2)] - 0.5).abs() < 1e-15 && (m[(0, 3)] + 0.5).abs() < 1e-15);
        assert!((m[(1, 2)] + 0.5).abs() < 1e-15 && (m[(1, 3)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rank_one_extremes() {
        let r = build_r_matrix(&identical_binaries(3)).unwrap();
        let sol = rank_one_solution(&r, &identical_binaries(3)).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-12);

        let model = independent(&[&[0.5, 0.5], &[0.3, 0.7], &[0.2, 0.2, 0.6]]);
        let r = build_r_matrix(&model).unwrap();
        let sol = rank_one_solution(&r, &model).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!(sol.coefficients.constraint_violation(model.marginals()) < 1e-9);
    }

    #[test]
    fn q_out_of_range() {
        let model = identical_binaries(2);
        let r = build_r_matrix(&model).unwrap();
        assert_eq!(ky_fan_upper_bound(&r, 3), Err(Error::QOutOfRange { q: 3, p: 2 }));
        assert!(matches!(
            bcd_fit(&model, 0, &FitConfig::default()),
            Err(Error::QOutOfRange { .. })
        ));
    }

    #[test]
    fn population_covariance_examples() {
        let model = identical_binaries(2);
        let h = core::f64::consts::FRAC_1_SQRT_2;
        let coeffs = CoefficientSet {
            a: vec![vec![h, -h], vec![h, -h]],
        };
        let k = population_covariance(&model, &coeffs);
        assert!(k.matrix().max_abs_diff(&Matrix::from_row_major(2, 2, vec![1.0; 4]).unwrap()) < 1e-15);

        let model = independent(&[&[0.2, 0.8], &[0.1, 0.3, 0.6], &[0.5, 0.5]]);
        let coeffs = CoefficientSet::random(model.marginals(), 3, 1);
        let k = population_covariance(&model, &coeffs);
        assert!(k.matrix().max_abs_diff(&Matrix::identity(3)) < 1e-12);
        assert!(k.check().is_ok());
    }

    #[test]
    fn independent_fit_reaches_q() {
        let model = independent(&[&[0.2, 0.8], &[0.1, 0.3, 0.6], &[0.5, 0.25, 0.25]]);
        for q in 1..=3 {
            let res = bcd_fit(&model, q, &FitConfig::default()).unwrap();
            assert!((res.objective() - q as f64).abs() < 1e-9);
            assert!(res.covariance.matrix().max_abs_diff(&Matrix::identity(3)) < 1e-9);
            assert!(res
                .warnings
                .iter()
                .any(|w| matches!(w, Warning::DegenerateUpdate { .. })));
        }
    }

    #[test]
    fn random_init_is_feasible_and_seeded() {
        let model = independent(&[&[0.2, 0.8], &[0.1, 0.3, 0.6]]);
        let a = CoefficientSet::random(model.marginals(), 7, 2);
        let b = CoefficientSet::random(model.marginals(), 7, 2);
        let c = CoefficientSet::random(model.marginals(), 7, 3);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.constraint_violation(model.marginals()) < 1e-12);
    }
}
