//! Globalized, regularized semismooth Newton method on the dual.
//!
//! Each iteration assembles the active pattern `sigma_ij = [alpha_i + beta_j - c_ij >= 0]`,
//! solves `(G + eps I) s = -F` with the Newton derivative
//!
//! ```text
//! G = [ diag(sigma 1_N)   sigma              ]
//!     [ sigma^T           diag(sigma^T 1_M)  ]
//! ```
//!
//! and backtracks along `s` until the Armijo condition holds. `G` is only
//! positive semidefinite (it always annihilates `(1_M, -1_N)`), hence the `eps`
//! shift.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{
    dual_gradient, dual_objective, marginal_residuals, plan_from_potentials, DiscreteProblem,
    DualPotentials, SolveReport, TraceRecord,
};

/// Smallest step length tried before the line search gives up.
pub const STEP_FLOOR: f64 = 1e-16;

/// Sparse 0/1 matrix stored row-wise (column indices per row, ascending).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivePattern {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl ActivePattern {
    /// Builds a pattern from per-row lists of column indices.
    pub fn from_rows(cols: usize, rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows.iter().cloned() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.iter().all(|&j| j < cols));
            col_idx.extend(r);
            row_ptr.push(col_idx.len());
        }
        Self { rows: rows.len(), cols, row_ptr, col_idx }
    }

    /// Entries of `mask` that are `true` are active.
    pub fn from_dense(mask: &ndarray::Array2<bool>) -> Self {
        let rows = mask
            .outer_iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v).map(|(j, _)| j).collect())
            .collect();
        Self::from_rows(mask.ncols(), rows)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// `sigma 1_N`.
    pub fn row_counts(&self) -> Array1<f64> {
        Array1::from_iter((0..self.rows).map(|i| self.row(i).len() as f64))
    }

    /// `sigma^T 1_M`.
    pub fn col_counts(&self) -> Array1<f64> {
        let mut c = Array1::zeros(self.cols);
        for &j in &self.col_idx {
            c[j] += 1.0;
        }
        c
    }

    /// Column-wise lists of the active row indices.
    fn transposed_rows(&self) -> Vec<Vec<usize>> {
        let mut t = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for &j in self.row(i) {
                t[j].push(i);
            }
        }
        t
    }

    pub fn to_dense(&self) -> ndarray::Array2<u8> {
        let mut d = ndarray::Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for &j in self.row(i) {
                d[[i, j]] = 1;
            }
        }
        d
    }
}

/// `sigma_ij = 1` iff `alpha_i + beta_j - c_ij >= 0` (ties are active).
pub fn assemble_active_pattern(p: &DiscreteProblem, d: &DualPotentials) -> Result<ActivePattern> {
    p.check_potentials(d)?;
    let cost = p.cost();
    let rows: Vec<Vec<usize>> = (0..p.rows())
        .into_par_iter()
        .map(|i| {
            let a = d.alpha[i];
            cost.row(i)
                .iter()
                .zip(d.beta.iter())
                .enumerate()
                .filter(|(_, (c, b))| a + *b - *c >= 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Ok(ActivePattern::from_rows(p.cols(), rows))
}

/// `G + eps I`, applied matrix-free from the pattern.
#[derive(Clone, Debug)]
pub struct NewtonMatrix {
    pub pattern: ActivePattern,
    pub row_counts: Array1<f64>,
    pub col_counts: Array1<f64>,
    pub epsilon: f64,
}

impl NewtonMatrix {
    pub fn new(pattern: ActivePattern, epsilon: f64) -> Self {
        let row_counts = pattern.row_counts();
        let col_counts = pattern.col_counts();
        Self { pattern, row_counts, col_counts, epsilon }
    }

    pub fn dim(&self) -> usize {
        self.row_counts.len() + self.col_counts.len()
    }

    /// Diagonal of `G + eps I`, row block first.
    pub fn diagonal(&self) -> (Array1<f64>, Array1<f64>) {
        (self.row_counts.mapv(|r| r + self.epsilon), self.col_counts.mapv(|c| c + self.epsilon))
    }

    /// `((sigma 1)∘a + sigma b + eps a, sigma^T a + (sigma^T 1)∘b + eps b)`.
    pub fn apply(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> (Array1<f64>, Array1<f64>) {
        let eps = self.epsilon;
        let pat = &self.pattern;
        let out_a = Array1::from_iter((0..pat.rows).map(|i| {
            let s: f64 = pat.row(i).iter().map(|&j| b[j]).sum();
            (self.row_counts[i] + eps) * a[i] + s
        }));
        let mut out_b = Array1::from_iter(
            self.col_counts.iter().zip(b.iter()).map(|(c, bj)| (c + eps) * bj),
        );
        for i in 0..pat.rows {
            let ai = a[i];
            for &j in pat.row(i) {
                out_b[j] += ai;
            }
        }
        (out_a, out_b)
    }
}

/// Free-function form of [`NewtonMatrix::apply`].
pub fn apply_newton_matrix(
    m: &NewtonMatrix,
    a: &Array1<f64>,
    b: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if a.len() != m.row_counts.len() || b.len() != m.col_counts.len() {
        return Err(Error::Dimension(format!(
            "vectors of length ({}, {}) for a Newton matrix with blocks ({}, {})",
            a.len(),
            b.len(),
            m.row_counts.len(),
            m.col_counts.len()
        )));
    }
    Ok(m.apply(a.view(), b.view()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LinearSolver {
    /// Jacobi-preconditioned conjugate gradients, matrix-free.
    #[default]
    ConjugateGradient,
    /// Schur complement onto the smaller block followed by a dense Cholesky factorization.
    DirectSparse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsnConfig {
    /// Shift added to the Newton matrix.
    pub epsilon: f64,
    /// Armijo slope factor.
    pub theta: f64,
    /// Backtracking factor.
    pub kappa: f64,
    /// Stop once both infinity-norm marginal residuals are at most this.
    pub tolerance: f64,
    pub max_iters: usize,
    pub linear_solver: LinearSolver,
    /// Relative residual target for conjugate gradients.
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
}

impl Default for SsnConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            theta: 0.1,
            kappa: 0.5,
            tolerance: 1e-6,
            max_iters: 500,
            linear_solver: LinearSolver::ConjugateGradient,
            cg_tolerance: 1e-10,
            cg_max_iters: 20_000,
        }
    }
}

impl SsnConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !in_unit(self.theta) || !in_unit(self.kappa) {
            return Err(Error::InvalidInput(format!(
                "Armijo parameters must lie in (0, 1), got theta = {}, kappa = {}",
                self.theta, self.kappa
            )));
        }
        if !(self.tolerance > 0.0) || !(self.cg_tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        if self.max_iters == 0 || self.cg_max_iters == 0 {
            return Err(Error::InvalidInput("iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

type Pair = (Array1<f64>, Array1<f64>);

/// Jacobi-preconditioned CG on `(G + eps I) x = rhs`, started from zero.
///
/// Returns the solution and the iteration count.
pub fn conjugate_gradient(
    m: &NewtonMatrix,
    rhs_a: &Array1<f64>,
    rhs_b: &Array1<f64>,
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Pair, usize)> {
    let (da, db) = m.diagonal();
    let dot = |x: &Pair, y: &Pair| x.0.dot(&y.0) + x.1.dot(&y.1);

    let mut x = (Array1::zeros(rhs_a.len()), Array1::zeros(rhs_b.len()));
    let mut r = (rhs_a.clone(), rhs_b.clone());
    let rhs_norm = dot(&r, &r).sqrt();
    if rhs_norm == 0.0 {
        return Ok((x, 0));
    }
    let target = rel_tol * rhs_norm;
    let mut z = (&r.0 / &da, &r.1 / &db);
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iters {
        let q = m.apply(dir.0.view(), dir.1.view());
        let curv = dot(&dir, &q);
        if !(curv > 0.0) {
            return Err(Error::LinearSolver { iterations: it, residual: dot(&r, &r).sqrt() / rhs_norm });
        }
        let step = rz / curv;
        x.0.scaled_add(step, &dir.0);
        x.1.scaled_add(step, &dir.1);
        r.0.scaled_add(-step, &q.0);
        r.1.scaled_add(-step, &q.1);
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok((x, it));
        }
        z = (&r.0 / &da, &r.1 / &db);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        dir.0 = &z.0 + &(beta * &dir.0);
        dir.1 = &z.1 + &(beta * &dir.1);
    }
    let residual = dot(&r, &r).sqrt() / rhs_norm;
    Err(Error::LinearSolver { iterations: max_iters, residual })
}

/// Solves `[[D1, S], [S^T, D2]] (x1; x2) = (r1; r2)` by eliminating the first block.
/// `lists[i]` holds the columns of `S` that are one in row `i`.
fn schur_solve(
    lists: &[Vec<usize>],
    d1: &Array1<f64>,
    d2: &Array1<f64>,
    r1: &Array1<f64>,
    r2: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = d2.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = d2[j];
    }
    let mut rhs = DVector::from_iterator(n, r2.iter().copied());
    for (i, list) in lists.iter().enumerate() {
        let w = 1.0 / d1[i];
        for &j in list {
            rhs[j] -= w * r1[i];
            for &l in list {
                k[(j, l)] -= w;
            }
        }
    }
    let chol = k.cholesky().ok_or(Error::LinearSolver { iterations: 0, residual: f64::NAN })?;
    let x2 = chol.solve(&rhs);
    let x1 = Array1::from_iter(lists.iter().enumerate().map(|(i, list)| {
        let s: f64 = list.iter().map(|&j| x2[j]).sum();
        (r1[i] - s) / d1[i]
    }));
    Ok((x1, Array1::from_iter(x2.iter().copied())))
}

/// Direct solve of `(G + eps I) x = rhs` via the Schur complement on the smaller block.
pub fn direct_solve(
    m: &NewtonMatrix,
    rhs_a: &Array1<f64>,
    rhs_b: &Array1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let (da, db) = m.diagonal();
    let (rows, cols) = m.pattern.shape();
    if cols <= rows {
        let lists: Vec<Vec<usize>> = (0..rows).map(|i| m.pattern.row(i).to_vec()).collect();
        schur_solve(&lists, &da, &db, rhs_a, rhs_b)
    } else {
        let lists = m.pattern.transposed_rows();
        let (xb, xa) = schur_solve(&lists, &db, &da, rhs_b, rhs_a)?;
        Ok((xa, xb))
    }
}

/// Diagnostics of one Newton step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    /// Accepted step length `t`.
    pub step_length: f64,
    /// `<F, s>`, negative whenever `F != 0`.
    pub directional_derivative: f64,
    /// `Phi(d + t s) - Phi(d)`, evaluated without cancellation.
    pub objective_change: f64,
    pub linear_iterations: usize,
    pub backtracks: usize,
}

/// Second-order part of `Phi(d + t s) - Phi(d) - t <F, s>`, summed entrywise.
///
/// For `P = alpha (+) beta - c` and `S = s_alpha (+) s_beta` each entry is
/// `1/2 (P + tS)_+^2 - 1/2 P_+^2 - t P_+ S >= 0`, computed in closed form per
/// sign case so that tiny decreases near the solution are not lost to
/// rounding in `Phi`.
fn objective_remainder(p: &DiscreteProblem, d: &DualPotentials, sa: &Array1<f64>, sb: &Array1<f64>, t: f64) -> f64 {
    let cost = p.cost();
    let parts: Vec<f64> = (0..p.rows())
        .into_par_iter()
        .map(|i| {
            let (a, da) = (d.alpha[i], sa[i]);
            let mut acc = 0.0;
            for ((c, b), db) in cost.row(i).iter().zip(d.beta.iter()).zip(sb.iter()) {
                let pij = a + b - c;
                let ts = t * (da + db);
                let q = pij + ts;
                acc += match (pij >= 0.0, q >= 0.0) {
                    (true, true) => 0.5 * ts * ts,
                    (true, false) => -pij * (0.5 * pij + ts),
                    (false, true) => 0.5 * q * q,
                    (false, false) => 0.0,
                };
            }
            acc
        })
        .collect();
    parts.iter().sum()
}

/// One regularized Newton step with Armijo backtracking.
///
/// Solves `(G + eps I) s = -F` and returns `d + t s` for the first
/// `t = kappa^k` with `Phi(d + t s) < Phi(d) + t theta <F, s>`.
pub fn ssn_step(p: &DiscreteProblem, d: &DualPotentials, cfg: &SsnConfig) -> Result<(DualPotentials, StepInfo)> {
    cfg.validate()?;
    let (f1, f2) = dual_gradient(p, d)?;
    let pattern = assemble_active_pattern(p, d)?;
    let matrix = NewtonMatrix::new(pattern, cfg.epsilon);
    let (neg1, neg2) = (-&f1, -&f2);
    let ((sa, sb), linear_iterations) = match cfg.linear_solver {
        LinearSolver::ConjugateGradient => {
            conjugate_gradient(&matrix, &neg1, &neg2, cfg.cg_tolerance, cfg.cg_max_iters)?
        }
        LinearSolver::DirectSparse => (direct_solve(&matrix, &neg1, &neg2)?, 1),
    };

    let slope = f1.dot(&sa) + f2.dot(&sb);
    if slope == 0.0 {
        let info = StepInfo {
            step_length: 1.0,
            directional_derivative: 0.0,
            objective_change: 0.0,
            linear_iterations,
            backtracks: 0,
        };
        return Ok((d.clone(), info));
    }
    if !(slope < 0.0) {
        return Err(Error::LineSearch { floor: STEP_FLOOR });
    }

    let mut t = 1.0;
    let mut backtracks = 0;
    loop {
        let change = t * slope + objective_remainder(p, d, &sa, &sb, t);
        if change < t * cfg.theta * slope {
            let next = DualPotentials { alpha: &d.alpha + &(t * &sa), beta: &d.beta + &(t * &sb) };
            let info = StepInfo {
                step_length: t,
                directional_derivative: slope,
                objective_change: change,
                linear_iterations,
                backtracks,
            };
            return Ok((next, info));
        }
        t *= cfg.kappa;
        backtracks += 1;
        if t < STEP_FLOOR {
            return Err(Error::LineSearch { floor: STEP_FLOOR });
        }
    }
}

fn residuals(p: &DiscreteProblem, d: &DualPotentials) -> Result<(f64, f64)> {
    marginal_residuals(p, &plan_from_potentials(p, d)?)
}

/// Iterates [`ssn_step`] from `d0` until both marginal residuals are at most
/// `cfg.tolerance`, also returning the per-step diagnostics.
pub fn ssn_solve_with_steps(
    p: &DiscreteProblem,
    d0: &DualPotentials,
    cfg: &SsnConfig,
) -> Result<(SolveReport, Vec<StepInfo>)> {
    cfg.validate()?;
    p.check_potentials(d0)?;
    if !d0.is_finite() {
        return Err(Error::InvalidInput("initial potentials must be finite".into()));
    }
    let mut d = d0.clone();
    let (mut rn, mut rm) = residuals(p, &d)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        phi: dual_objective(p, &d)?,
        residual_nu_inf: rn,
        residual_mu_inf: rm,
        step_length: 1.0,
    }];
    let mut steps = Vec::new();
    let mut k = 0;
    while (rn > cfg.tolerance || rm > cfg.tolerance) && k < cfg.max_iters {
        let (next, info) = ssn_step(p, &d, cfg)?;
        d = next;
        k += 1;
        (rn, rm) = residuals(p, &d)?;
        trace.push(TraceRecord {
            iteration: k,
            phi: dual_objective(p, &d)?,
            residual_nu_inf: rn,
            residual_mu_inf: rm,
            step_length: info.step_length,
        });
        steps.push(info);
    }
    let plan = plan_from_potentials(p, &d)?;
    let converged = rn <= cfg.tolerance && rm <= cfg.tolerance;
    Ok((SolveReport { plan, potentials: d, trace, converged, iterations: k }, steps))
}

/// Iterates [`ssn_step`] from `d0` until both marginal residuals are at most `cfg.tolerance`.
pub fn ssn_solve(p: &DiscreteProblem, d0: &DualPotentials, cfg: &SsnConfig) -> Result<SolveReport> {
    ssn_solve_with_steps(p, d0, cfg).map(|(r, _)| r)
}

/// [`ssn_solve`] from zero potentials.
pub fn ssn_solve_default(p: &DiscreteProblem, cfg: &SsnConfig) -> Result<SolveReport> {
    ssn_solve(p, &DualPotentials::zeros(p.rows(), p.cols()), cfg)
}
