//! Non-linear Gauss-Seidel: alternating exact minimization of the dual
//! objective over `alpha` (all rows at once) and `beta` (all columns at once).
//!
//! With `beta` fixed, row `i` of the optimality system only involves
//! `alpha_i`, so each half-sweep is a batch of independent scalar equations.
//! Rows read the `beta` of the previous half-sweep, which makes the result
//! independent of the order (and thread) in which rows are solved.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{
    dual_objective, marginal_residuals, plan_from_potentials, DiscreteProblem, DualPotentials,
    SolveReport, TraceRecord,
};
use crate::scalar::{self, ScalarMethod};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NlgsConfig {
    /// Stop once both infinity-norm marginal residuals are at most this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub scalar_method: ScalarMethod,
}

impl Default for NlgsConfig {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_sweeps: 10_000, scalar_method: ScalarMethod::DirectSearch }
    }
}

impl NlgsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidInput("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solves every row equation `sum_j (alpha_i + beta_j - c_ij)_+ = gamma nu_i` for `alpha`.
pub fn update_alpha(p: &DiscreteProblem, beta: ArrayView1<'_, f64>, method: ScalarMethod) -> Result<Array1<f64>> {
    if beta.len() != p.cols() {
        return Err(Error::Dimension(format!("beta has length {}, expected {}", beta.len(), p.cols())));
    }
    let cost = p.cost();
    let gamma = p.gamma();
    let nu = p.nu();
    let alpha: Result<Vec<f64>> = (0..p.rows())
        .into_par_iter()
        .map(|i| {
            let y: Vec<f64> = cost.row(i).iter().zip(beta.iter()).map(|(c, b)| c - b).collect();
            scalar::solve(&y, gamma * nu[i], method)
        })
        .collect();
    Ok(Array1::from(alpha?))
}

/// Solves every column equation `sum_i (alpha_i + beta_j - c_ij)_+ = gamma mu_j` for `beta`.
pub fn update_beta(p: &DiscreteProblem, alpha: ArrayView1<'_, f64>, method: ScalarMethod) -> Result<Array1<f64>> {
    if alpha.len() != p.rows() {
        return Err(Error::Dimension(format!("alpha has length {}, expected {}", alpha.len(), p.rows())));
    }
    let cost = p.cost();
    let gamma = p.gamma();
    let mu = p.mu();
    let beta: Result<Vec<f64>> = (0..p.cols())
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = cost.column(j).iter().zip(alpha.iter()).map(|(c, a)| c - a).collect();
            scalar::solve(&y, gamma * mu[j], method)
        })
        .collect();
    Ok(Array1::from(beta?))
}

fn record(p: &DiscreteProblem, d: &DualPotentials, iteration: usize) -> Result<(TraceRecord, f64)> {
    let plan = plan_from_potentials(p, d)?;
    let (rn, rm) = marginal_residuals(p, &plan)?;
    let phi = dual_objective(p, d)?;
    let rec = TraceRecord { iteration, phi, residual_nu_inf: rn, residual_mu_inf: rm, step_length: 1.0 };
    Ok((rec, rn.max(rm)))
}

/// Runs sweeps from `(alpha, beta) = (0, beta0)` until both marginal residuals
/// are at most `cfg.tolerance` or `cfg.max_sweeps` is reached.
///
/// Running out of sweeps is not an error; the report has `converged == false`.
pub fn nlgs_solve(p: &DiscreteProblem, beta0: &Array1<f64>, cfg: &NlgsConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if beta0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("beta0 must be finite".into()));
    }
    let mut d = DualPotentials { alpha: Array1::zeros(p.rows()), beta: beta0.clone() };
    p.check_potentials(&d)?;

    let (rec, mut res) = record(p, &d, 0)?;
    let mut trace = vec![rec];
    let mut sweeps = 0;
    while res > cfg.tolerance && sweeps < cfg.max_sweeps {
        d.alpha = update_alpha(p, d.beta.view(), cfg.scalar_method)?;
        d.beta = update_beta(p, d.alpha.view(), cfg.scalar_method)?;
        sweeps += 1;
        let (rec, r) = record(p, &d, sweeps)?;
        trace.push(rec);
        res = r;
    }
    let plan = plan_from_potentials(p, &d)?;
    Ok(SolveReport { plan, potentials: d, trace, converged: res <= cfg.tolerance, iterations: sweeps })
}

/// [`nlgs_solve`] from `beta0 = 0`.
pub fn nlgs_solve_default(p: &DiscreteProblem, cfg: &NlgsConfig) -> Result<SolveReport> {
    nlgs_solve(p, &Array1::zeros(p.cols()), cfg)
}
