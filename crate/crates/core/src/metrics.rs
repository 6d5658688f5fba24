//! Evaluation metrics and the train/test split.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::DataMatrix;
use crate::linalg::Matrix;
use crate::rng::{streams, sub_rng};
use crate::{Error, Result};

/// Default cap on the number of point pairs used by
/// [`spearman_distance_correlation`].
pub const DEFAULT_PAIR_BUDGET: usize = 2_000_000;

/// Share of the total variance `p` captured by the `q` largest eigenvalues.
pub fn explained_variance_fraction(values: &[f64], q: usize, p: usize) -> f64 {
    values.iter().take(q).sum::<f64>() / p as f64
}

/// 1-based ranks, ties sharing the average of their positions.
pub fn rank_average(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = avg;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / libm::sqrt(sxx * syy)
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&rank_average(x), &rank_average(y))
}

fn distance(m: &Matrix, i: usize, j: usize) -> f64 {
    let d2: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
    libm::sqrt(d2)
}

/// Spearman correlation between the pairwise Euclidean distances of two
/// embeddings of the same points. Uses every pair when there are at most
/// `pair_budget` of them, otherwise `pair_budget` pairs drawn uniformly with
/// a generator seeded by `seed`.
pub fn spearman_distance_correlation(
    truth: &Matrix,
    estimate: &Matrix,
    pair_budget: usize,
    seed: u64,
) -> Result<f64> {
    let n = truth.rows();
    if estimate.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: estimate.rows(),
        });
    }
    if n < 3 {
        return Err(Error::TooSmall {
            rows: n,
            cols: truth.cols(),
        });
    }
    if pair_budget == 0 {
        return Err(Error::InvalidArgument("pair budget must be positive".into()));
    }
    if !truth.is_finite() || !estimate.is_finite() {
        return Err(Error::NonFinite);
    }
    let total = n * (n - 1) / 2;
    let (mut dt, mut de) = (Vec::new(), Vec::new());
    if total <= pair_budget {
        dt.reserve(total);
        de.reserve(total);
        for i in 0..n {
            for j in i + 1..n {
                dt.push(distance(truth, i, j));
                de.push(distance(estimate, i, j));
            }
        }
    } else {
        let mut rng = sub_rng(seed, streams::PAIRS, 0);
        dt.reserve(pair_budget);
        de.reserve(pair_budget);
        while dt.len() < pair_budget {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                dt.push(distance(truth, i, j));
                de.push(distance(estimate, i, j));
            }
        }
    }
    Ok(spearman(&dt, &de))
}

/// Seeded split of `0..n` into (train, test) index sets, each sorted.
/// The train side gets `round(fraction * n)` rows.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument("split fraction must lie in (0, 1)".into()));
    }
    let k = libm::round(fraction * n as f64) as usize;
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument("split leaves one side empty".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut sub_rng(seed, streams::SPLIT, 0));
    let mut test = idx.split_off(k);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

pub fn split_train_test(data: &DataMatrix, fraction: f64, seed: u64) -> Result<(DataMatrix, DataMatrix)> {
    let (train, test) = split_indices(data.n(), fraction, seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}
