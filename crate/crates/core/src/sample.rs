//! Sample MCPCA: block coordinate descent straight on a data matrix, updating
//! each transform to the normalized conditional expectation of the current
//! residual target given that feature.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bcd::{self, CoordinateState, UPDATE_EPS};
use crate::continuous::{eval_pwl, PiecewiseLinearFn};
use crate::data::{Column, ColumnSchema, DataMatrix};
use crate::discrete::{
    build_r_matrix, check_q, needs_rank_one, pick_best, rank_one_solution, resolve_init, CoefficientSet,
    DistributionModel, McpcaResult,
};
use crate::distribution::{empirical_marginal, MarginalDist};
use crate::linalg::{dot, CovarianceMatrix, EigenSystem, Matrix};
use crate::restart::{FitConfig, Init, RestartExecutor, Sequential};
use crate::rng::{streams, sub_rng};
use crate::synth::JointDistribution;
use crate::{Error, Result, Warning};

/// Lookup table `φ_i(symbol)` for a discrete feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformTable {
    pub variable: usize,
    pub values: Vec<f64>,
}

impl TransformTable {
    /// Value for `code`; unseen symbols map to 0, the training mean.
    pub fn lookup(&self, code: u32) -> Option<f64> {
        self.values.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureTransform {
    Table(TransformTable),
    PiecewiseLinear(PiecewiseLinearFn),
    /// `(x - mean) / scale` applied to the feature's numeric value.
    Affine { mean: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mcpca,
    Pca,
}

/// A fitted model: per-feature transforms plus the eigenstructure of the
/// covariance of the transformed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McpcaModel {
    pub method: Method,
    pub q: usize,
    /// Discretization level for continuous features, when one was used.
    pub d: Option<usize>,
    pub schema: Vec<ColumnSchema>,
    pub transforms: Vec<FeatureTransform>,
    pub covariance: CovarianceMatrix,
    pub eigen: EigenSystem,
    pub directions: Vec<Vec<f64>>,
    pub objective_trajectory: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub restart: usize,
    pub config: FitConfig,
    pub warnings: Vec<Warning>,
}

impl McpcaModel {
    pub fn objective(&self) -> f64 {
        *self.objective_trajectory.last().expect("trajectory is never empty")
    }

    pub fn p(&self) -> usize {
        self.transforms.len()
    }
}

// Per-feature state of the sample iteration.
struct SampleState<'a> {
    codes: Vec<&'a [u32]>,
    probs: Vec<&'a [f64]>,
    counts: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
    // transformed columns φ_i(x^i)
    features: Vec<Vec<f64>>,
    // scores z_r = Σ_i v_{r,i} φ_i(x^i), kept current within a sweep
    scores: Vec<Vec<f64>>,
    n: usize,
}

impl<'a> SampleState<'a> {
    fn new(data: &'a DataMatrix, marginals: &'a [MarginalDist], tables: Vec<Vec<f64>>) -> Result<Self> {
        let n = data.n();
        let codes = (0..data.p()).map(|i| data.codes(i)).collect::<Result<Vec<_>>>()?;
        let counts = codes
            .iter()
            .zip(&tables)
            .map(|(c, t)| {
                let mut counts = vec![0usize; t.len()];
                c.iter().for_each(|&s| counts[s as usize] += 1);
                counts
            })
            .collect();
        let features = codes
            .iter()
            .zip(&tables)
            .map(|(c, t)| c.iter().map(|&s| t[s as usize]).collect())
            .collect();
        Ok(Self {
            codes,
            probs: marginals.iter().map(MarginalDist::probs).collect(),
            counts,
            tables,
            features,
            scores: Vec::new(),
            n,
        })
    }
}

impl CoordinateState for SampleState<'_> {
    fn p(&self) -> usize {
        self.codes.len()
    }

    fn covariance(&self) -> Matrix {
        let p = self.p();
        let n = self.n as f64;
        let mut k = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = dot(&self.features[i], &self.features[j]) / n;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    fn begin_sweep(&mut self, v: &[Vec<f64>]) {
        self.scores = v
            .iter()
            .map(|vr| {
                let mut z = vec![0.0; self.n];
                for (f, &w) in self.features.iter().zip(vr) {
                    z.iter_mut().zip(f).for_each(|(zs, x)| *zs += w * x);
                }
                z
            })
            .collect();
    }

    fn update(&mut self, k: usize, v: &[Vec<f64>]) -> bool {
        let own: f64 = v.iter().map(|vr| vr[k] * vr[k]).sum();
        let symbols = self.tables[k].len();
        let mut acc = vec![0.0; symbols];
        let fk = &self.features[k];
        for (s, &y) in self.codes[k].iter().enumerate() {
            // w_k(s) = Σ_r v_{r,k} Σ_{i≠k} v_{r,i} φ_i(x_{s,i})
            let mut w = -own * fk[s];
            for (vr, z) in v.iter().zip(&self.scores) {
                w += vr[k] * z[s];
            }
            acc[y as usize] += w;
        }
        let mut theta: Vec<f64> = acc
            .iter()
            .zip(&self.counts[k])
            .map(|(a, &c)| a / c as f64)
            .collect();
        // The mean is zero in exact arithmetic; removing it explicitly stops
        // rounding error from growing along the constant function.
        let mean: f64 = theta.iter().zip(self.probs[k]).map(|(t, p)| p * t).sum();
        theta.iter_mut().for_each(|t| *t -= mean);
        let second_moment: f64 = theta.iter().zip(self.probs[k]).map(|(t, p)| p * t * t).sum();
        let rms = libm::sqrt(second_moment);
        if rms <= UPDATE_EPS {
            return false;
        }
        let table: Vec<f64> = theta.iter().map(|t| t / rms).collect();
        let mut column = Vec::with_capacity(self.n);
        for (s, &y) in self.codes[k].iter().enumerate() {
            let new = table[y as usize];
            let delta = new - self.features[k][s];
            for (vr, z) in v.iter().zip(self.scores.iter_mut()) {
                z[s] += vr[k] * delta;
            }
            column.push(new);
        }
        self.features[k] = column;
        self.tables[k] = table;
        true
    }
}

/// Prepared inputs shared by all restarts of a sample fit.
struct Prepared {
    data: DataMatrix,
    marginals: Vec<MarginalDist>,
}

impl Prepared {
    fn new(data: &DataMatrix) -> Result<Self> {
        for j in 0..data.p() {
            if !matches!(data.column(j), Column::Discrete(_)) {
                return Err(Error::NotDiscrete(j));
            }
        }
        let data = data.pruned()?;
        let marginals = (0..data.p())
            .map(|i| empirical_marginal(&data, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { data, marginals })
    }
}

/// Outcome of one sample run, in the same shape as the distribution path.
fn sample_run(prep: &Prepared, q: usize, init: CoefficientSet, config: &FitConfig) -> Result<McpcaResult> {
    let tables = init.to_tables(&prep.marginals);
    let mut state = SampleState::new(&prep.data, &prep.marginals, tables)?;
    let trace = bcd::run(&mut state, q, config)?;
    let coefficients = CoefficientSet::from_tables(&prep.marginals, &state.tables);
    Ok(McpcaResult {
        coefficients,
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

/// Sample MCPCA on an all-discrete table with the default restart plan.
pub fn sample_fit(data: &DataMatrix, q: usize, config: &FitConfig) -> Result<McpcaModel> {
    sample_fit_with(data, q, config, &Init::plan(config), &Sequential)
}

/// Sample MCPCA with an explicit list of initializations. Given coefficient
/// sets refer to the pruned alphabets of `data`.
pub fn sample_fit_with<E: RestartExecutor>(
    data: &DataMatrix,
    q: usize,
    config: &FitConfig,
    inits: &[Init],
    executor: &E,
) -> Result<McpcaModel> {
    let prep = Prepared::new(data)?;
    let best = fit_prepared(&prep, q, config, inits, executor)?;
    let tables = best.coefficients.to_tables(&prep.marginals);
    Ok(McpcaModel {
        method: Method::Mcpca,
        q,
        d: None,
        schema: prep.data.schema().to_vec(),
        transforms: tables
            .into_iter()
            .enumerate()
            .map(|(variable, values)| FeatureTransform::Table(TransformTable { variable, values }))
            .collect(),
        covariance: best.covariance,
        eigen: best.eigen,
        directions: best.directions,
        objective_trajectory: best.objective_trajectory,
        converged: best.converged,
        iterations: best.iterations,
        restart: best.restart,
        config: *config,
        warnings: best.warnings,
    })
}

/// The raw best run of a sample fit, with coefficients in `a`-space; this is
/// what the distribution path returns too, so the two can be compared.
pub fn sample_fit_result<E: RestartExecutor>(
    data: &DataMatrix,
    q: usize,
    config: &FitConfig,
    inits: &[Init],
    executor: &E,
) -> Result<McpcaResult> {
    fit_prepared(&Prepared::new(data)?, q, config, inits, executor)
}

fn fit_prepared<E: RestartExecutor>(
    prep: &Prepared,
    q: usize,
    config: &FitConfig,
    inits: &[Init],
    executor: &E,
) -> Result<McpcaResult> {
    check_q(q, prep.data.p())?;
    if inits.is_empty() {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let rank_one = if needs_rank_one(inits) {
        let model = DistributionModel::empirical(&prep.data)?;
        let r = build_r_matrix(&model)?;
        Some(rank_one_solution(&r, &model)?)
    } else {
        None
    };
    let runs = executor.run(inits.len(), |idx| {
        let (start, mut warnings) = resolve_init(&inits[idx], &prep.marginals, rank_one.as_ref(), config.seed);
        let mut res = sample_run(prep, q, start, config)?;
        res.restart = idx;
        warnings.append(&mut res.warnings);
        res.warnings = warnings;
        Ok(res)
    });
    pick_best(runs)
}

/// Transformed features and their projections on the model directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    /// `n x p`, entry `(s, i) = φ_i(X_{s,i})`.
    pub transformed: Matrix,
    /// `n x q`, rows projected on `v_1..v_q`.
    pub scores: Matrix,
    /// Discrete entries whose symbol was not in the training alphabet.
    pub unseen: usize,
}

/// Applies fitted transforms to data encoded with the model's schema.
pub fn apply_model(model: &McpcaModel, data: &DataMatrix) -> Result<Applied> {
    if data.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: data.p(),
        });
    }
    let n = data.n();
    let mut transformed = Matrix::zeros(n, model.p());
    let mut unseen = 0;
    for (j, transform) in model.transforms.iter().enumerate() {
        let mismatch = |reason: &str| Error::SchemaMismatch {
            column: j,
            reason: reason.into(),
        };
        match (transform, data.column(j)) {
            (FeatureTransform::Table(t), Column::Discrete(codes)) => {
                for (s, &c) in codes.iter().enumerate() {
                    transformed[(s, j)] = t.lookup(c).unwrap_or_else(|| {
                        unseen += 1;
                        0.0
                    });
                }
            }
            (FeatureTransform::PiecewiseLinear(f), Column::Continuous(x)) => {
                for (s, &v) in x.iter().enumerate() {
                    transformed[(s, j)] = eval_pwl(f, v);
                }
            }
            (FeatureTransform::Affine { mean, scale }, col) => {
                for s in 0..n {
                    let raw = match col {
                        Column::Continuous(x) => Some(x[s]),
                        Column::Discrete(codes) => data.schema()[j].symbol_value(codes[s]),
                    };
                    transformed[(s, j)] = match raw {
                        Some(x) => (x - mean) / scale,
                        None => {
                            unseen += 1;
                            0.0
                        }
                    };
                }
            }
            (FeatureTransform::Table(_), _) => return Err(mismatch("expected a discrete column")),
            (FeatureTransform::PiecewiseLinear(_), _) => return Err(mismatch("expected a continuous column")),
        }
    }
    let directions = Matrix::from_columns(&model.directions)?;
    let scores = transformed.matmul(&directions)?;
    Ok(Applied {
        transformed,
        scores,
        unseen,
    })
}

/// Fits sample MCPCA on the first `n` draws of one i.i.d. stream from `truth`
/// for every `n` in `n_list` and records the objective. Samples are nested, so
/// the result traces a single realization as it grows.
pub fn consistency_probe(
    truth: &JointDistribution,
    n_list: &[usize],
    q: usize,
    config: &FitConfig,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    n_list
        .iter()
        .map(|&n| {
            let mut rng = sub_rng(seed, streams::JOINT_SAMPLE, 0);
            let data = truth.sample(n, &mut rng)?;
            let fit = sample_fit(&data, q, config)?;
            Ok((n, fit.objective()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_columns_reach_p() {
        let col = vec![0, 1, 2, 1, 0, 2, 2, 1, 0, 0];
        let data = DataMatrix::from_codes(vec![col.clone(), col.clone(), col]).unwrap();
        let model = sample_fit(&data, 1, &FitConfig::default()).unwrap();
        assert!((model.objective() - 3.0).abs() < 1e-9);
        let tables: Vec<&Vec<f64>> = model
            .transforms
            .iter()
            .map(|t| match t {
                FeatureTransform::Table(t) => &t.values,
                _ => unreachable!(),
            })
            .collect();
        for t in &tables[1..] {
            let same = t.iter().zip(tables[0]).all(|(a, b)| (a - b).abs() < 1e-9);
            let flipped = t.iter().zip(tables[0]).all(|(a, b)| (a + b).abs() < 1e-9);
            assert!(same || flipped);
        }
    }

    #[test]
    fn rejects_continuous_and_bad_q() {
        let data = DataMatrix::from_continuous(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0]]).unwrap();
        assert_eq!(sample_fit(&data, 1, &FitConfig::default()), Err(Error::NotDiscrete(0)));
        let data = DataMatrix::from_codes(vec![vec![0, 1, 0], vec![1, 1, 0]]).unwrap();
        assert!(matches!(
            sample_fit(&data, 3, &FitConfig::default()),
            Err(Error::QOutOfRange { q: 3, p: 2 })
        ));
    }

    #[test]
    fn single_symbol_column_rejected() {
        let data = DataMatrix::from_codes(vec![vec![0, 1, 0, 1], vec![1, 1, 1, 1]]).unwrap();
        assert_eq!(sample_fit(&data, 1, &FitConfig::default()), Err(Error::DegenerateColumn(1)));
    }

    #[test]
    fn unseen_symbols_map_to_zero() {
        let data = DataMatrix::from_codes(vec![vec![0, 1, 0, 1, 1], vec![0, 1, 1, 1, 0]]).unwrap();
        let model = sample_fit(&data, 1, &FitConfig::default()).unwrap();
        let probe = DataMatrix::new(
            vec![Column::Discrete(vec![2, 0]), Column::Discrete(vec![0, 2])],
            model.schema.clone(),
        )
        .unwrap();
        let out = apply_model(&model, &probe).unwrap();
        assert_eq!(out.unseen, 2);
        assert_eq!(out.transformed[(0, 0)], 0.0);
        assert_eq!(out.transformed[(1, 1)], 0.0);
    }

    #[test]
    fn column_count_mismatch() {
        let data = DataMatrix::from_codes(vec![vec![0, 1, 0, 1], vec![0, 1, 1, 0]]).unwrap();
        let model = sample_fit(&data, 1, &FitConfig::default()).unwrap();
        let three = DataMatrix::from_codes(vec![vec![0, 1], vec![0, 1], vec![1, 0]]).unwrap();
        assert!(matches!(apply_model(&model, &three), Err(Error::DimensionMismatch { .. })));
    }
}
