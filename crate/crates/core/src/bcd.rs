// Outer loop shared by the distribution and the sample block coordinate descent.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{ky_fan, sym_eig, CovarianceMatrix, EigenSystem, Matrix};
use crate::restart::FitConfig;
use crate::{Result, Warning};

/// Norms at or below this make a coordinate update degenerate.
pub(crate) const UPDATE_EPS: f64 = 1e-12;

pub(crate) trait CoordinateState {
    fn p(&self) -> usize;

    fn covariance(&self) -> Matrix;

    /// Called once per sweep before the coordinate updates.
    fn begin_sweep(&mut self, _directions: &[Vec<f64>]) {}

    /// Maximizes the objective over variable `k` with everything else fixed.
    /// Returns `false` when the update direction vanished and the variable was
    /// left unchanged.
    fn update(&mut self, k: usize, directions: &[Vec<f64>]) -> bool;
}

pub(crate) struct Trace {
    pub covariance: CovarianceMatrix,
    pub eigen: EigenSystem,
    pub trajectory: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<Warning>,
}

pub(crate) fn run<S: CoordinateState>(state: &mut S, q: usize, config: &FitConfig) -> Result<Trace> {
    let p = state.p();
    let mut cov = state.covariance();
    let mut eigen = sym_eig(&cov)?;
    let mut rho = ky_fan(&eigen.values, q)?;
    let mut trajectory = vec![rho];
    let mut warnings = Vec::new();
    let mut warned_degenerate = vec![false; p];
    let mut warned_nonsimple = false;
    if !eigen.top_simple(q) {
        warnings.push(Warning::NonSimpleEigenvalues { iteration: 0 });
        warned_nonsimple = true;
    }

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=config.max_iters {
        let directions = eigen.leading_vectors(q);
        state.begin_sweep(&directions);
        for (k, warned) in warned_degenerate.iter_mut().enumerate() {
            if !state.update(k, &directions) && !*warned {
                *warned = true;
                warnings.push(Warning::DegenerateUpdate {
                    iteration: it,
                    variable: k,
                });
            }
        }
        cov = state.covariance();
        eigen = sym_eig(&cov)?;
        let next = ky_fan(&eigen.values, q)?;
        trajectory.push(next);
        iterations = it;
        if !warned_nonsimple && !eigen.top_simple(q) {
            warnings.push(Warning::NonSimpleEigenvalues { iteration: it });
            warned_nonsimple = true;
        }
        let gain = next - rho;
        rho = next;
        if gain < config.tol {
            converged = true;
            break;
        }
    }

    Ok(Trace {
        covariance: CovarianceMatrix::new(cov),
        eigen,
        trajectory,
        converged,
        iterations,
        warnings,
    })
}
