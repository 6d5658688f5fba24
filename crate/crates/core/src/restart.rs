//! Fit configuration, initialization plans and restart scheduling.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::discrete::CoefficientSet;

/// Objectives within this distance count as tied when picking the best
/// restart; the earliest restart wins a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the objective by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 1000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

/// Starting point of one block coordinate descent run.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Closed-form rank-one solution from the leading eigenvector of R.
    RankOne,
    /// Standard normal draws projected onto the feasible sphere, seeded per
    /// `(seed, stream, variable)`.
    Random { stream: usize },
    Given(CoefficientSet),
}

impl Init {
    /// Restart 0 is the rank-one solution, the others are random.
    pub fn plan(config: &FitConfig) -> Vec<Init> {
        let mut inits = Vec::with_capacity(config.restarts.max(1));
        inits.push(Init::RankOne);
        inits.extend((1..config.restarts).map(|stream| Init::Random { stream }));
        inits
    }

    /// Like [`Init::plan`] but restart 0 starts from `warm`.
    pub fn plan_warm(config: &FitConfig, warm: CoefficientSet) -> Vec<Init> {
        let mut inits = Init::plan(config);
        inits[0] = Init::Given(warm);
        inits
    }
}

/// Runs independent restarts. Implementations may execute them in parallel
/// but must return results in index order.
pub trait RestartExecutor {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl RestartExecutor for Sequential {
    fn run<T, F>(&self, count: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..count).map(job).collect()
    }
}

/// Index of the best objective; ties within [`TIE_TOL`] go to the lowest
/// index.
pub fn best_index(objectives: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &obj) in objectives.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if obj > objectives[b] + TIE_TOL => best = Some(i),
            _ => {}
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_the_earliest_restart() {
        assert_eq!(best_index(&[1.0, 1.0 + 1e-12, 0.5]), Some(0));
        assert_eq!(best_index(&[1.0, 1.1, 1.1]), Some(1));
        assert_eq!(best_index(&[]), None);
    }

    #[test]
    fn default_plan() {
        let inits = Init::plan(&FitConfig::default());
        assert_eq!(inits.len(), 10);
        assert_eq!(inits[0], Init::RankOne);
        assert_eq!(inits[9], Init::Random { stream: 9 });
    }
}
