//! Discrete quadratically regularized transport problem.
//!
//! The primal problem is
//!
//! ```text
//! min  <c, pi> + gamma/2 |pi|_F^2   s.t.  pi 1_N = nu,  pi^T 1_M = mu,  pi >= 0
//! ```
//!
//! with `c` of shape `M x N`, row marginal `nu` (length `M`) and column marginal
//! `mu` (length `N`). Its dual objective is
//!
//! ```text
//! Phi(alpha, beta) = 1/2 |(alpha (+) beta - c)_+|_F^2 - gamma <nu, alpha> - gamma <mu, beta>
//! ```
//!
//! where `(alpha (+) beta)_ij = alpha_i + beta_j`. Optimal plans are recovered as
//! `pi = (alpha (+) beta - c)_+ / gamma`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance on `|sum(mu) - sum(nu)|` accepted at construction.
pub const MASS_BALANCE_TOL: f64 = 1e-12;

/// Cost matrix, marginals and regularization strength.
#[derive(Clone, Debug)]
pub struct DiscreteProblem {
    cost: Array2<f64>,
    mu: Array1<f64>,
    nu: Array1<f64>,
    gamma: f64,
}

impl DiscreteProblem {
    /// Builds a problem, checking shapes, positivity of the marginals and of
    /// `gamma`, and mass balance.
    pub fn new(cost: Array2<f64>, mu: Array1<f64>, nu: Array1<f64>, gamma: f64) -> Result<Self> {
        let (m, n) = cost.dim();
        if m == 0 || n == 0 {
            return Err(Error::Dimension("cost matrix must be non-empty".into()));
        }
        if nu.len() != m {
            return Err(Error::Dimension(format!(
                "row marginal nu has length {} but cost has {} rows",
                nu.len(),
                m
            )));
        }
        if mu.len() != n {
            return Err(Error::Dimension(format!(
                "column marginal mu has length {} but cost has {} columns",
                mu.len(),
                n
            )));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
        }
        if let Some((i, v)) = cost.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("cost entry {i} is not finite ({v})")));
        }
        for (name, marg) in [("mu", &mu), ("nu", &nu)] {
            if let Some((i, v)) = marg.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "marginal {name} has non-positive entry {v} at index {i}"
                )));
            }
        }
        let (smu, snu) = (mu.sum(), nu.sum());
        if (smu - snu).abs() > MASS_BALANCE_TOL * smu.max(snu) {
            return Err(Error::InvalidInput(format!(
                "mass mismatch: sum(mu) = {smu} but sum(nu) = {snu}"
            )));
        }
        Ok(Self { cost, mu, nu, gamma })
    }

    pub fn cost(&self) -> ArrayView2<'_, f64> {
        self.cost.view()
    }

    /// Column marginal (length `N`).
    pub fn mu(&self) -> ArrayView1<'_, f64> {
        self.mu.view()
    }

    /// Row marginal (length `M`).
    pub fn nu(&self) -> ArrayView1<'_, f64> {
        self.nu.view()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of rows `M`.
    pub fn rows(&self) -> usize {
        self.cost.nrows()
    }

    /// Number of columns `N`.
    pub fn cols(&self) -> usize {
        self.cost.ncols()
    }

    /// Same data with a different regularization parameter.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.cost.clone(), self.mu.clone(), self.nu.clone(), gamma)
    }

    /// Total transported mass.
    pub fn mass(&self) -> f64 {
        self.nu.sum()
    }

    pub(crate) fn check_potentials(&self, d: &DualPotentials) -> Result<()> {
        if d.alpha.len() != self.rows() || d.beta.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "potentials have lengths ({}, {}) but problem is {} x {}",
                d.alpha.len(),
                d.beta.len(),
                self.rows(),
                self.cols()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_plan(&self, plan: &TransportPlan) -> Result<()> {
        if plan.shape() != (self.rows(), self.cols()) {
            return Err(Error::Dimension(format!(
                "plan is {:?} but problem is {} x {}",
                plan.shape(),
                self.rows(),
                self.cols()
            )));
        }
        Ok(())
    }
}

/// Dual variables: `alpha` pairs with the row marginal, `beta` with the column marginal.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials {
    pub alpha: Array1<f64>,
    pub beta: Array1<f64>,
}

impl DualPotentials {
    pub fn new(alpha: Array1<f64>, beta: Array1<f64>) -> Result<Self> {
        if alpha.iter().chain(beta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potentials must be finite".into()));
        }
        Ok(Self { alpha, beta })
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self { alpha: Array1::zeros(m), beta: Array1::zeros(n) }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.iter().chain(self.beta.iter()).all(|v| v.is_finite())
    }
}

/// Sparse nonnegative `M x N` plan stored as row-major sorted triplets.
///
/// Only strictly positive entries are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    /// Builds a plan from triplets, which must be sorted row-major, in range,
    /// duplicate-free and strictly positive.
    pub fn from_triplets(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for w in entries.windows(2) {
            if (w[0].0, w[0].1) >= (w[1].0, w[1].1) {
                return Err(Error::InvalidInput(format!(
                    "plan triplets not strictly sorted at ({}, {})",
                    w[1].0, w[1].1
                )));
            }
        }
        for &(i, j, v) in &entries {
            if i >= rows || j >= cols {
                return Err(Error::Dimension(format!("plan entry ({i}, {j}) out of range")));
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("plan entry ({i}, {j}) = {v} is not positive")));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    /// Keeps the strictly positive entries of a dense matrix.
    pub fn from_dense(dense: ArrayView2<'_, f64>) -> Self {
        let (rows, cols) = dense.dim();
        let entries = dense
            .indexed_iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self { rows, cols, entries }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.entries.iter().map(|e| e.2).fold(0.0, f64::max)
    }

    pub fn row_sums(&self) -> Array1<f64> {
        let mut s = Array1::zeros(self.rows);
        for &(i, _, v) in &self.entries {
            s[i] += v;
        }
        s
    }

    pub fn col_sums(&self) -> Array1<f64> {
        let mut s = Array1::zeros(self.cols);
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.rows, self.cols));
        for &(i, j, v) in &self.entries {
            d[[i, j]] = v;
        }
        d
    }
}

/// One line of a solver trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phi: f64,
    pub residual_nu_inf: f64,
    pub residual_mu_inf: f64,
    pub step_length: f64,
}

/// Outcome of an iterative solve. `trace[0]` is the initial state.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub plan: TransportPlan,
    pub potentials: DualPotentials,
    pub trace: Vec<TraceRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl SolveReport {
    pub fn final_record(&self) -> &TraceRecord {
        self.trace.last().expect("trace always holds the initial state")
    }
}

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Per-row `(sum_j (alpha_i + beta_j - c_ij)_+, sum_j (..)_+^2)`.
fn row_positive_sums(p: &DiscreteProblem, d: &DualPotentials) -> Vec<(f64, f64)> {
    let cost = p.cost();
    (0..p.rows())
        .into_par_iter()
        .map(|i| {
            let a = d.alpha[i];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for (c, b) in cost.row(i).iter().zip(d.beta.iter()) {
                let v = pos(a + b - c);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect()
}

/// `pi_ij = max(alpha_i + beta_j - c_ij, 0) / gamma`, zeros not stored.
pub fn plan_from_potentials(p: &DiscreteProblem, d: &DualPotentials) -> Result<TransportPlan> {
    p.check_potentials(d)?;
    let cost = p.cost();
    let gamma = p.gamma();
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..p.rows())
        .into_par_iter()
        .map(|i| {
            let a = d.alpha[i];
            cost.row(i)
                .iter()
                .zip(d.beta.iter())
                .enumerate()
                .filter_map(|(j, (c, b))| {
                    let v = a + b - c;
                    (v > 0.0).then(|| (i, j, v / gamma))
                })
                .collect()
        })
        .collect();
    Ok(TransportPlan { rows: p.rows(), cols: p.cols(), entries: rows.into_iter().flatten().collect() })
}

/// `<c, pi> + gamma/2 |pi|_F^2`.
pub fn primal_objective(p: &DiscreteProblem, plan: &TransportPlan) -> Result<f64> {
    p.check_plan(plan)?;
    let cost = p.cost();
    let (lin, quad) = plan
        .entries()
        .iter()
        .fold((0.0, 0.0), |(l, q), &(i, j, v)| (l + cost[[i, j]] * v, q + v * v));
    Ok(lin + 0.5 * p.gamma() * quad)
}

/// The dual objective `Phi(alpha, beta)`.
pub fn dual_objective(p: &DiscreteProblem, d: &DualPotentials) -> Result<f64> {
    p.check_potentials(d)?;
    let quad: f64 = row_positive_sums(p, d).iter().map(|r| r.1).sum();
    Ok(0.5 * quad - p.gamma() * (p.nu().dot(&d.alpha) + p.mu().dot(&d.beta)))
}

/// The nonsmooth map `F = (dPhi/dalpha, dPhi/dbeta)`.
pub fn dual_gradient(p: &DiscreteProblem, d: &DualPotentials) -> Result<(Array1<f64>, Array1<f64>)> {
    p.check_potentials(d)?;
    let gamma = p.gamma();
    let rows = row_positive_sums(p, d);
    let f1 = Array1::from_iter(rows.iter().zip(p.nu().iter()).map(|(r, nu)| r.0 - gamma * nu));
    let mut f2 = p.mu().mapv(|mu| -gamma * mu);
    let cost = p.cost();
    for i in 0..p.rows() {
        let a = d.alpha[i];
        for ((f, c), b) in f2.iter_mut().zip(cost.row(i).iter()).zip(d.beta.iter()) {
            *f += pos(a + b - c);
        }
    }
    Ok((f1, f2))
}

fn inf_norm_diff(a: &Array1<f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `(|pi 1_N - nu|_inf, |pi^T 1_M - mu|_inf)`.
pub fn marginal_residuals(p: &DiscreteProblem, plan: &TransportPlan) -> Result<(f64, f64)> {
    p.check_plan(plan)?;
    Ok((inf_norm_diff(&plan.row_sums(), p.nu()), inf_norm_diff(&plan.col_sums(), p.mu())))
}

/// `Phi(alpha, beta) + gamma * E_gamma(pi(alpha, beta))`.
///
/// Vanishes at primal-dual optimal pairs, but a zero gap alone does not imply
/// optimality: combine it with [`marginal_residuals`].
pub fn duality_gap(p: &DiscreteProblem, d: &DualPotentials) -> Result<f64> {
    let plan = plan_from_potentials(p, d)?;
    Ok(dual_objective(p, d)? + p.gamma() * primal_objective(p, &plan)?)
}

/// Shifts `(alpha + C, beta - C)` so that `sum(beta) = 0`. The induced plan is unchanged.
pub fn normalize_gauge(d: &DualPotentials) -> DualPotentials {
    if d.beta.is_empty() {
        return d.clone();
    }
    let shift = d.beta.mean().unwrap_or(0.0);
    DualPotentials { alpha: d.alpha.mapv(|a| a + shift), beta: d.beta.mapv(|b| b - shift) }
}
