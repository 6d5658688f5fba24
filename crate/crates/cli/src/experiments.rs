//! Named experiments behind `mcpca bench`. Each returns a plot-ready table
//! with one row per repeat (or instance) plus the objective trajectories of
//! every fit it ran.

use std::time::Instant;

use anyhow::{bail, Result};
use clap::ValueEnum;
use rand::Rng;

use mcpca_core::continuous::fit_continuous_with;
use mcpca_core::data::DataMatrix;
use mcpca_core::discrete::{bcd_fit_with, build_r_matrix, ky_fan_upper_bound, rank_one_solution};
use mcpca_core::linalg::ky_fan;
use mcpca_core::metrics::{spearman_distance_correlation, DEFAULT_PAIR_BUDGET};
use mcpca_core::pca::pca_fit;
use mcpca_core::restart::{FitConfig, Init, RestartExecutor};
use mcpca_core::sample::{apply_model, consistency_probe, sample_fit_with};
use mcpca_core::synth::{
    default_blocks, gen_block_discrete, gen_gaussian, gen_lowrank_continuous, oracle_ternary, random_correlation,
    Block, JointDistribution, LowRankTransform,
};
use mcpca_core::{continuous::KnotRule, sub_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// Block-correlated discrete data behind random value maps: Ky Fan of
    /// MCPCA versus PCA.
    Fig3,
    /// Low rank, p=20, q=1, polynomial maps, no noise.
    Fig4a,
    /// Low rank, p=20, q=5, polynomial maps, no noise.
    Fig4b,
    /// Low rank, p=50, q=10, polynomial maps, Gaussian noise.
    Fig4c,
    /// Low rank, p=50, q=10, piecewise-linear maps, Gaussian noise.
    Fig4d,
    /// Sample objective against the population optimum as n grows.
    Consistency,
    /// Rank-one closed form, block coordinate descent and the upper bound.
    Rank1,
    /// Block coordinate descent against brute force on three ternary
    /// variables.
    Ternary,
    /// Jointly Gaussian data: MCPCA with d=10 against PCA.
    Gaussian,
    /// Seconds per sweep of sample MCPCA as n grows.
    Scaling,
}

// Columns that label a row rather than measure something.
const LABELS: [&str; 3] = ["repeat", "instance", "seed"];

/// Numeric results table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let j = self.header.iter().position(|h| h == name).expect("known column");
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Median of every value column (not in `keys`, not a repeat label) per
    /// distinct combination of `keys`, in order of first appearance.
    pub fn medians(&self, keys: &[&str]) -> Table {
        let key_idx: Vec<usize> = keys
            .iter()
            .map(|k| self.header.iter().position(|h| h == k).expect("known key"))
            .collect();
        let value_idx: Vec<usize> = (0..self.header.len())
            .filter(|j| !key_idx.contains(j) && !LABELS.contains(&self.header[*j].as_str()))
            .collect();
        let mut groups: Vec<(Vec<f64>, Vec<&Vec<f64>>)> = Vec::new();
        for r in &self.rows {
            let key: Vec<f64> = key_idx.iter().map(|&j| r[j]).collect();
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        let mut out = Table {
            header: key_idx
                .iter()
                .chain(&value_idx)
                .map(|&j| self.header[j].clone())
                .collect(),
            rows: Vec::new(),
        };
        for (key, members) in groups {
            let mut row = key;
            for &j in &value_idx {
                row.push(median(&members.iter().map(|r| r[j]).collect::<Vec<_>>()));
            }
            out.rows.push(row);
        }
        out
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.is_empty() {
        f64::NAN
    } else if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    /// Objective trajectory of every fit that ran.
    pub trajectories: Vec<Vec<f64>>,
}

/// Seed of repeat `r` for base seed `seed`.
pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

pub fn run<E: RestartExecutor>(
    experiment: Experiment,
    repeats: usize,
    seed: u64,
    config: &FitConfig,
    executor: &E,
) -> Result<Outcome> {
    if repeats == 0 {
        bail!("at least one repeat is required");
    }
    match experiment {
        Experiment::Fig3 => fig3(repeats, seed, config, executor),
        Experiment::Fig4a => fig4(LowRankPanel::A, repeats, seed, config, executor),
        Experiment::Fig4b => fig4(LowRankPanel::B, repeats, seed, config, executor),
        Experiment::Fig4c => fig4(LowRankPanel::C, repeats, seed, config, executor),
        Experiment::Fig4d => fig4(LowRankPanel::D, repeats, seed, config, executor),
        Experiment::Consistency => consistency(repeats, seed, &[100, 1_000, 10_000], config),
        Experiment::Rank1 => rank1(repeats, seed, config, executor),
        Experiment::Ternary => ternary(repeats, seed, 500, 180, config, executor),
        Experiment::Gaussian => gaussian(repeats, seed, config, executor),
        Experiment::Scaling => scaling(repeats, seed, &[50_000, 100_000, 200_000]),
    }
}

pub const FIG3_N: usize = 1000;
pub const FIG3_LEVELS: usize = 10;
pub const FIG3_MAX_Q: usize = 6;

/// Per repeat and per fitted `q`, the `q'`-Ky Fan norm of the MCPCA
/// covariance and of the PCA correlation matrix for every `q' <= 6`.
pub fn fig3<E: RestartExecutor>(repeats: usize, seed: u64, config: &FitConfig, executor: &E) -> Result<Outcome> {
    let mut table = Table::new(&["repeat", "seed", "q", "q_prime", "mcpca", "pca"]);
    let mut trajectories = Vec::new();
    for r in 0..repeats {
        let s = repeat_seed(seed, r);
        let data = gen_block_discrete(FIG3_N, &default_blocks(), FIG3_LEVELS, s)?;
        let pca = pca_fit(&data.observed.numeric_matrix(), 1)?;
        for q in 1..=FIG3_MAX_Q {
            let model = sample_fit_with(&data.observed, q, config, &Init::plan(config), executor)?;
            for qp in 1..=FIG3_MAX_Q {
                table.rows.push(vec![
                    r as f64,
                    s as f64,
                    q as f64,
                    qp as f64,
                    ky_fan(&model.eigen.values, qp)?,
                    ky_fan(&pca.eigen.values, qp)?,
                ]);
            }
            trajectories.push(model.objective_trajectory);
        }
    }
    Ok(Outcome { table, trajectories })
}

pub const LOWRANK_N: usize = 1000;
pub const LOWRANK_D: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowRankPanel {
    A,
    B,
    C,
    D,
}

impl LowRankPanel {
    /// `(p, q, noise, transform)`.
    pub fn setup(self) -> (usize, usize, bool, LowRankTransform) {
        match self {
            LowRankPanel::A => (20, 1, false, LowRankTransform::Polynomial),
            LowRankPanel::B => (20, 5, false, LowRankTransform::Polynomial),
            LowRankPanel::C => (50, 10, true, LowRankTransform::Polynomial),
            LowRankPanel::D => (50, 10, true, LowRankTransform::Piecewise),
        }
    }
}

/// Spearman correlation between true and recovered pairwise distances, for
/// MCPCA (d = 10) and PCA.
pub fn fig4<E: RestartExecutor>(
    panel: LowRankPanel,
    repeats: usize,
    seed: u64,
    config: &FitConfig,
    executor: &E,
) -> Result<Outcome> {
    let (p, q, noise, transform) = panel.setup();
    let mut table = Table::new(&["repeat", "seed", "mcpca", "pca"]);
    let mut trajectories = Vec::new();
    for r in 0..repeats {
        let s = repeat_seed(seed, r);
        let data = gen_lowrank_continuous(LOWRANK_N, p, q, noise, transform, s)?;
        let model = fit_continuous_with(&data.observed, q, LOWRANK_D, KnotRule::EqualFrequency, config, executor)?;
        let mcpca_scores = apply_model(&model, &data.observed)?.scores;
        let x = data.observed.numeric_matrix();
        let pca_scores = pca_fit(&x, q)?.scores(&x)?;
        table.rows.push(vec![
            r as f64,
            s as f64,
            spearman_distance_correlation(&data.coordinates, &mcpca_scores, DEFAULT_PAIR_BUDGET, s)?,
            spearman_distance_correlation(&data.coordinates, &pca_scores, DEFAULT_PAIR_BUDGET, s)?,
        ]);
        trajectories.push(model.objective_trajectory);
    }
    Ok(Outcome { table, trajectories })
}

/// For one random joint distribution of three ternary variables per repeat:
/// the sample objective at each `n` against the population optimum (q = 1,
/// where the closed form is exact).
pub fn consistency(repeats: usize, seed: u64, ns: &[usize], config: &FitConfig) -> Result<Outcome> {
    let mut table = Table::new(&["repeat", "seed", "n", "sample", "population", "gap"]);
    for r in 0..repeats {
        let s = repeat_seed(seed, r);
        let truth = JointDistribution::random_dirichlet(&[3, 3, 3], s)?;
        let model = truth.model()?;
        let population = ky_fan_upper_bound(&build_r_matrix(&model)?, 1)?;
        for (n, value) in consistency_probe(&truth, ns, 1, config, s)? {
            table
                .rows
                .push(vec![r as f64, s as f64, n as f64, value, population, (value - population).abs()]);
        }
    }
    // consistency_probe reports final objectives only
    Ok(Outcome {
        table,
        trajectories: Vec::new(),
    })
}

/// Random discrete model with 2..=5 variables of 2..=4 symbols each.
pub fn random_small_joint(seed: u64) -> Result<JointDistribution> {
    let mut rng = sub_rng(seed, 0xface, 0);
    let p = rng.random_range(2..=5);
    let sizes: Vec<usize> = (0..p).map(|_| rng.random_range(2..=4)).collect();
    Ok(JointDistribution::random_dirichlet(&sizes, seed)?)
}

pub fn rank1<E: RestartExecutor>(instances: usize, seed: u64, config: &FitConfig, executor: &E) -> Result<Outcome> {
    let mut table = Table::new(&["instance", "seed", "p", "closed_form", "bcd", "bound"]);
    let mut trajectories = Vec::new();
    for r in 0..instances {
        let s = repeat_seed(seed, r);
        let model = random_small_joint(s)?.model()?;
        let rm = build_r_matrix(&model)?;
        let closed = rank_one_solution(&rm, &model)?.value;
        let fit = bcd_fit_with(&model, 1, config, &[Init::RankOne], executor)?;
        table.rows.push(vec![
            r as f64,
            s as f64,
            model.p() as f64,
            closed,
            fit.objective(),
            ky_fan_upper_bound(&rm, 1)?,
        ]);
        trajectories.push(fit.objective_trajectory);
    }
    Ok(Outcome { table, trajectories })
}

/// Empirical model of `n` draws from a random joint of three ternary
/// variables; block coordinate descent against the grid oracle for q = 1, 2.
pub fn ternary<E: RestartExecutor>(
    instances: usize,
    seed: u64,
    n: usize,
    grid: usize,
    config: &FitConfig,
    executor: &E,
) -> Result<Outcome> {
    let mut table = Table::new(&["instance", "seed", "q", "oracle", "bcd"]);
    let mut trajectories = Vec::new();
    for r in 0..instances {
        let s = repeat_seed(seed, r);
        let truth = JointDistribution::random_dirichlet(&[3, 3, 3], s)?;
        let data = truth.sample(n, &mut sub_rng(s, 0x7e7, 0))?;
        let model = mcpca_core::discrete::DistributionModel::empirical(&data)?;
        for q in 1..=2 {
            let fit = bcd_fit_with(&model, q, config, &Init::plan(config), executor)?;
            let oracle = oracle_ternary(&model, q, grid)?;
            table
                .rows
                .push(vec![r as f64, s as f64, q as f64, oracle.value, fit.objective()]);
            trajectories.push(fit.objective_trajectory);
        }
    }
    Ok(Outcome { table, trajectories })
}

pub const GAUSSIAN_N: usize = 5000;
pub const GAUSSIAN_P: usize = 10;

/// Jointly Gaussian data with a random correlation matrix: MCPCA (d = 10)
/// and PCA objectives for q = 1, 3, 5.
pub fn gaussian<E: RestartExecutor>(repeats: usize, seed: u64, config: &FitConfig, executor: &E) -> Result<Outcome> {
    let mut table = Table::new(&["repeat", "seed", "q", "mcpca", "pca"]);
    let mut trajectories = Vec::new();
    for r in 0..repeats {
        let s = repeat_seed(seed, r);
        let data = gen_gaussian(GAUSSIAN_N, &random_correlation(GAUSSIAN_P, s)?, s)?;
        let pca = pca_fit(&data.numeric_matrix(), 1)?;
        for q in [1, 3, 5] {
            let model = fit_continuous_with(&data, q, 10, KnotRule::EqualFrequency, config, executor)?;
            table
                .rows
                .push(vec![r as f64, s as f64, q as f64, model.objective(), ky_fan(&pca.eigen.values, q)?]);
            trajectories.push(model.objective_trajectory);
        }
    }
    Ok(Outcome { table, trajectories })
}

pub const SCALING_P: usize = 20;
pub const SCALING_Q: usize = 3;
pub const SCALING_SWEEPS: usize = 10;

/// Two blocks of ten correlated ten-level variables.
pub fn scaling_data(n: usize, seed: u64) -> Result<DataMatrix> {
    let blocks = [
        Block {
            size: 10,
            correlation: 0.6,
        },
        Block {
            size: 10,
            correlation: 0.3,
        },
    ];
    Ok(gen_block_discrete(n, &blocks, 10, seed)?.observed)
}

/// Wall time per sweep of one sample MCPCA run (random start, fixed number of
/// sweeps), best of `repeats` timings, for each `n`.
pub fn scaling(repeats: usize, seed: u64, ns: &[usize]) -> Result<Outcome> {
    let mut table = Table::new(&["n", "seconds_per_sweep"]);
    let mut trajectories = Vec::new();
    let config = FitConfig {
        restarts: 1,
        max_iters: SCALING_SWEEPS,
        tol: f64::NEG_INFINITY,
        seed,
    };
    for &n in ns {
        let data = scaling_data(n, seed)?;
        let mut best = f64::INFINITY;
        for _ in 0..repeats {
            let start = Instant::now();
            let model = sample_fit_with(
                &data,
                SCALING_Q,
                &config,
                &[Init::Random { stream: 1 }],
                &mcpca_core::restart::Sequential,
            )?;
            let per_sweep = start.elapsed().as_secs_f64() / model.iterations.max(1) as f64;
            best = best.min(per_sweep);
            trajectories.push(model.objective_trajectory);
        }
        table.rows.push(vec![n as f64, best]);
    }
    Ok(Outcome { table, trajectories })
}
