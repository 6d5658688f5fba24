//! Continuous features: discretization into cells, sample MCPCA on the cell
//! indices, and lifting the learned tables back to piecewise-linear functions.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Cell, Column, ColumnSchema, DataMatrix, Domain};
use crate::discrete::CoefficientSet;
use crate::distribution::empirical_marginal;
use crate::linalg::{ky_fan, CovarianceMatrix};
use crate::pca::pca_fit;
use crate::restart::{FitConfig, Init, RestartExecutor, Sequential};
use crate::sample::{sample_fit_with, FeatureTransform, McpcaModel, Method};
use crate::{Error, Result, Warning};

/// Cell boundaries of one continuous feature. A value `v` falls in cell
/// `#(thresholds < v)`, so values on a threshold go to the lower cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub thresholds: Vec<f64>,
    /// One representative point per cell (median of the training values in
    /// the cell, or the cell midpoint before fitting to data).
    pub anchors: Vec<f64>,
}

impl KnotVector {
    pub fn cells(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// Merges cells that hold no training value and re-anchors every cell at
    /// the median of its values. `sorted` must be sorted ascending.
    pub fn fit_to(&self, sorted: &[f64]) -> KnotVector {
        fit_cells(&self.thresholds, sorted)
    }
}

fn fit_cells(candidates: &[f64], sorted: &[f64]) -> KnotVector {
    let mut thresholds = Vec::with_capacity(candidates.len());
    let mut start = 0;
    for &t in candidates {
        let end = sorted.partition_point(|&x| x <= t);
        if end > start && end < sorted.len() {
            thresholds.push(t);
            start = end;
        }
    }
    let mut anchors = Vec::with_capacity(thresholds.len() + 1);
    let mut lo = 0;
    for hi in thresholds
        .iter()
        .map(|&t| sorted.partition_point(|&x| x <= t))
        .chain(core::iter::once(sorted.len()))
    {
        anchors.push(median(&sorted[lo..hi]));
        lo = hi;
    }
    KnotVector { thresholds, anchors }
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

/// `d` equal-width cells over `[lo, hi]`.
pub fn uniform_knots(lo: f64, hi: f64, d: usize) -> Result<KnotVector> {
    if d < 2 {
        return Err(Error::InvalidArgument("uniform knots need d >= 2".into()));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument("empty range".into()));
    }
    let width = (hi - lo) / d as f64;
    Ok(KnotVector {
        thresholds: (1..d).map(|j| lo + j as f64 * width).collect(),
        anchors: (0..d).map(|j| lo + (j as f64 + 0.5) * width).collect(),
    })
}

/// Thresholds at the empirical `j/d` quantiles, each the midpoint between
/// adjacent order statistics. Repeated thresholds and empty cells are merged,
/// so the result can have fewer than `d` cells.
pub fn equal_frequency_knots(sorted: &[f64], d: usize) -> Result<KnotVector> {
    let n = sorted.len();
    if d < 2 {
        return Err(Error::InvalidArgument("equal-frequency knots need d >= 2".into()));
    }
    if n < d {
        return Err(Error::InvalidArgument("fewer samples than cells".into()));
    }
    if sorted.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if !(sorted[0] < sorted[n - 1]) {
        return Err(Error::InvalidArgument("fewer than two distinct values".into()));
    }
    let mut candidates: Vec<f64> = (1..d)
        .map(|j| {
            let idx = j * n / d;
            0.5 * (sorted[idx - 1] + sorted[idx])
        })
        .collect();
    candidates.dedup();
    Ok(fit_cells(&candidates, sorted))
}

/// 0-based cell index of every value.
pub fn discretize(column: &[f64], knots: &KnotVector) -> Result<Vec<u32>> {
    column
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            Ok(knots.thresholds.partition_point(|&t| t < v) as u32)
        })
        .collect()
}

/// Piecewise-linear function through control points `(xs[j], ws[j])`,
/// constant beyond the outermost points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearFn {
    pub xs: Vec<f64>,
    pub ws: Vec<f64>,
}

impl PiecewiseLinearFn {
    pub fn new(xs: Vec<f64>, ws: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ws.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: ws.len(),
            });
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("control abscissae must increase strictly".into()));
        }
        Ok(Self { xs, ws })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

pub fn eval_pwl(f: &PiecewiseLinearFn, x: f64) -> f64 {
    let m = f.xs.len() - 1;
    if x <= f.xs[0] {
        return f.ws[0];
    }
    if x >= f.xs[m] {
        return f.ws[m];
    }
    // xs[j] <= x < xs[j + 1]
    let j = f.xs.partition_point(|&k| k <= x) - 1;
    let t = (x - f.xs[j]) / (f.xs[j + 1] - f.xs[j]);
    f.ws[j] + (f.ws[j + 1] - f.ws[j]) * t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KnotRule {
    #[default]
    EqualFrequency,
    Uniform,
}

/// MCPCA for tables with continuous (and possibly discrete) features.
///
/// `d = 1` restricts every transform to an affine map and reduces to PCA on
/// standardized features. For `d >= 2` each continuous feature is cut into `d`
/// equal-frequency cells, sample MCPCA runs on the cell indices, and each
/// learned table is lifted to a piecewise-linear function through the cell
/// medians.
pub fn fit_continuous(data: &DataMatrix, q: usize, d: usize, config: &FitConfig) -> Result<McpcaModel> {
    fit_continuous_with(data, q, d, KnotRule::EqualFrequency, config, &Sequential)
}

/// As [`fit_continuous`], with the knot rule and restart executor chosen.
///
/// Restart 0 starts every continuous feature from Gaussian normal scores of
/// its cells and every discrete feature from its standardized label values.
/// Normal scores depend only on ranks, so this start is unchanged by any
/// monotone distortion of the inputs; it also decides ties such as columns
/// that all discretize identically. The rank-one closed form and
/// `config.restarts - 1` random starts follow.
pub fn fit_continuous_with<E: RestartExecutor>(
    data: &DataMatrix,
    q: usize,
    d: usize,
    rule: KnotRule,
    config: &FitConfig,
    executor: &E,
) -> Result<McpcaModel> {
    match d {
        0 => Err(Error::InvalidArgument("d must be at least 1".into())),
        1 => fit_affine(data, q, config),
        _ => fit_discretized(data, q, d, rule, config, executor),
    }
}

fn fit_affine(data: &DataMatrix, q: usize, config: &FitConfig) -> Result<McpcaModel> {
    let pca = pca_fit(&data.numeric_matrix(), q)?;
    let objective = ky_fan(&pca.eigen.values, q)?;
    Ok(McpcaModel {
        method: Method::Mcpca,
        q,
        d: Some(1),
        schema: data.schema().to_vec(),
        transforms: pca
            .mean
            .iter()
            .zip(&pca.scale)
            .map(|(&mean, &scale)| FeatureTransform::Affine { mean, scale })
            .collect(),
        covariance: CovarianceMatrix::new(pca.correlation.clone()),
        directions: pca.directions(),
        eigen: pca.eigen,
        objective_trajectory: alloc::vec![objective],
        converged: true,
        iterations: 0,
        restart: 0,
        config: *config,
        warnings: Vec::new(),
    })
}

fn fit_discretized<E: RestartExecutor>(
    data: &DataMatrix,
    q: usize,
    d: usize,
    rule: KnotRule,
    config: &FitConfig,
    executor: &E,
) -> Result<McpcaModel> {
    let mut columns = Vec::with_capacity(data.p());
    let mut schema = Vec::with_capacity(data.p());
    let mut knots: Vec<Option<(KnotVector, f64, f64)>> = Vec::with_capacity(data.p());
    let mut warnings = Vec::new();
    for (j, col) in data.columns().iter().enumerate() {
        match col {
            Column::Continuous(x) => {
                let mut sorted = x.clone();
                sorted.sort_by(f64::total_cmp);
                let kv = match rule {
                    KnotRule::EqualFrequency => equal_frequency_knots(&sorted, d),
                    KnotRule::Uniform => uniform_knots(sorted[0], sorted[sorted.len() - 1], d)
                        .map(|k| k.fit_to(&sorted)),
                }
                .map_err(|e| match e {
                    Error::InvalidArgument(_) => Error::DegenerateColumn(j),
                    other => other,
                })?;
                if kv.cells() < d {
                    warnings.push(Warning::MergedKnots {
                        column: j,
                        requested: d,
                        effective: kv.cells(),
                    });
                }
                columns.push(Column::Discrete(discretize(x, &kv)?));
                schema.push(ColumnSchema {
                    name: data.schema()[j].name.clone(),
                    domain: Domain::Discrete {
                        alphabet: kv.anchors.iter().map(|&a| Cell::Number(a)).collect(),
                    },
                });
                knots.push(Some((kv, sorted[0], sorted[sorted.len() - 1])));
            }
            Column::Discrete(_) => {
                columns.push(col.clone());
                schema.push(data.schema()[j].clone());
                knots.push(None);
            }
        }
    }
    let cells = DataMatrix::new(columns, schema)?.pruned()?;

    let marginals = (0..cells.p())
        .map(|i| empirical_marginal(&cells, i))
        .collect::<Result<Vec<_>>>()?;
    let start: Vec<Vec<f64>> = cells
        .schema()
        .iter()
        .zip(&marginals)
        .zip(&knots)
        .map(|((sch, m), kv)| {
            let raw: Vec<f64> = match kv {
                Some(_) => normal_scores(m.probs()),
                None => (0..m.len())
                    .map(|c| sch.symbol_value(c as u32).expect("pruned alphabet"))
                    .collect(),
            };
            standardize(&raw, m.probs())
        })
        .collect();
    let mut inits = Vec::with_capacity(config.restarts + 1);
    inits.push(Init::Given(CoefficientSet::from_tables(&marginals, &start)));
    inits.extend(Init::plan(config));

    let mut model = sample_fit_with(&cells, q, config, &inits, executor)?;
    for (j, kv) in knots.iter().enumerate() {
        if let Some((kv, lo, hi)) = kv {
            let FeatureTransform::Table(t) = &model.transforms[j] else {
                unreachable!("sample fit returns tables");
            };
            let f = lift(kv, *lo, *hi, &t.values)?;
            model.transforms[j] = FeatureTransform::PiecewiseLinear(f);
            model.schema[j] = data.schema()[j].clone();
        }
    }
    model.d = Some(d);
    warnings.append(&mut model.warnings);
    model.warnings = warnings;
    Ok(model)
}

/// Piecewise-linear function taking `table[c]` at the anchor of cell `c`.
/// The outermost segments are continued out to `lo` and `hi` (the training
/// range), so a strictly monotone table lifts to a function that is strictly
/// monotone over the whole range rather than flat in the outer half-cells.
pub fn lift(knots: &KnotVector, lo: f64, hi: f64, table: &[f64]) -> Result<PiecewiseLinearFn> {
    let (mut xs, mut ws) = (knots.anchors.clone(), table.to_vec());
    let m = xs.len();
    if m >= 2 {
        if lo < xs[0] {
            let slope = (ws[1] - ws[0]) / (xs[1] - xs[0]);
            xs.insert(0, lo);
            ws.insert(0, ws[0] - slope * (xs[1] - lo));
        }
        let m = xs.len();
        if hi > xs[m - 1] {
            let slope = (ws[m - 1] - ws[m - 2]) / (xs[m - 1] - xs[m - 2]);
            xs.push(hi);
            ws.push(ws[m - 1] + slope * (hi - xs[m - 1]));
        }
    }
    PiecewiseLinearFn::new(xs, ws)
}

// Mean of a standard normal variable within each quantile band, the bands
// having masses `probs` in order.
fn normal_scores(probs: &[f64]) -> Vec<f64> {
    let mut upper_density = 0.0;
    let mut cum = 0.0;
    probs
        .iter()
        .enumerate()
        .map(|(c, &pr)| {
            let lower_density = upper_density;
            cum += pr;
            upper_density = if c + 1 == probs.len() { 0.0 } else { normal_density(normal_quantile(cum)) };
            (lower_density - upper_density) / pr
        })
        .collect()
}

fn normal_density(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

// Inverse of the standard normal distribution function by bisection.
fn normal_quantile(u: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * libm::erfc(-mid / core::f64::consts::SQRT_2) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

// Zero mean, unit second moment under `probs`.
fn standardize(values: &[f64], probs: &[f64]) -> Vec<f64> {
    let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
    let var: f64 = values.iter().zip(probs).map(|(v, p)| p * (v - mean) * (v - mean)).sum();
    let sd = libm::sqrt(var);
    values.iter().map(|v| (v - mean) / sd).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_knots(0.0, 1.0, 4).unwrap().thresholds, vec![0.25, 0.5, 0.75]);
        assert_eq!(uniform_knots(0.0, 1.0, 2).unwrap().thresholds, vec![0.5]);
        assert_eq!(uniform_knots(-3.0, 3.0, 3).unwrap().thresholds, vec![-1.0, 1.0]);
        assert!(uniform_knots(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn equal_frequency_order_statistics() {
        let col: Vec<f64> = (1..=100).map(f64::from).collect();
        let kv = equal_frequency_knots(&col, 4).unwrap();
        assert_eq!(kv.thresholds, vec![25.5, 50.5, 75.5]);
        assert_eq!(kv.anchors, vec![13.0, 38.0, 63.0, 88.0]);
    }

    #[test]
    fn equal_frequency_merges_repeats() {
        let mut col = vec![5.0; 60];
        col.extend((0..20).map(|i| 6.0 + i as f64));
        col.extend((0..20).map(|i| -20.0 + i as f64));
        col.sort_by(f64::total_cmp);
        let kv = equal_frequency_knots(&col, 5).unwrap();
        assert!(kv.cells() < 5);
        assert!(kv.thresholds.windows(2).all(|w| w[0] < w[1]));
        let cells = discretize(&col, &kv).unwrap();
        for c in 0..kv.cells() as u32 {
            assert!(cells.contains(&c));
        }
        assert!(equal_frequency_knots(&[1.0; 10], 2).is_err());
    }

    #[test]
    fn discretize_boundaries() {
        let kv = uniform_knots(0.0, 1.0, 4).unwrap();
        assert_eq!(discretize(&[-5.0, 5.0, 0.6, 0.5, 0.25], &kv).unwrap(), vec![0, 3, 2, 1, 0]);
        assert_eq!(discretize(&[f64::NAN], &kv), Err(Error::NonFinite));
    }

    #[test]
    fn pwl_evaluation() {
        let f = PiecewiseLinearFn::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(eval_pwl(&f, 0.5), 0.5);
        let g = PiecewiseLinearFn::new(vec![-1.0, 0.3, 2.0], vec![0.7, -0.1, 3.3]).unwrap();
        for (x, w) in g.xs.iter().zip(&g.ws) {
            assert_eq!(eval_pwl(&g, *x), *w);
        }
        assert_eq!(eval_pwl(&g, -10.0), 0.7);
        assert_eq!(eval_pwl(&g, 10.0), 3.3);
        assert!(PiecewiseLinearFn::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }
}
