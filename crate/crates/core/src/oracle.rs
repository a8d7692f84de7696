//! Brute-force reference solver for small instances.
//!
//! Completing the square, `<c, pi> + gamma/2 |pi|^2 = gamma/2 |pi + c/gamma|^2 + const`,
//! so the optimal plan is the Euclidean projection of `-c/gamma` onto the
//! transport polytope. Dykstra's algorithm computes it by cycling through the
//! projections onto {row sums = nu}, {column sums = mu} and {pi >= 0}.
//! It shares no code with the dual solvers.

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::problem::DiscreteProblem;

/// Largest `M * N` accepted.
pub const ORACLE_MAX_ENTRIES: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub max_cycles: usize,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { max_cycles: 1_000_000, tolerance: 1e-10 }
    }
}

/// Dense optimal plan with constraint violations at most `cfg.tolerance`.
pub fn oracle_solve(p: &DiscreteProblem, cfg: &OracleConfig) -> Result<Array2<f64>> {
    let (m, n) = (p.rows(), p.cols());
    if m * n > ORACLE_MAX_ENTRIES {
        return Err(Error::InvalidInput(format!("oracle is limited to {ORACLE_MAX_ENTRIES} entries, got {m} x {n}")));
    }
    if cfg.max_cycles == 0 || !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidInput("oracle needs positive max_cycles and tolerance".into()));
    }
    let nu = p.nu();
    let mu = p.mu();
    let mut x = p.cost().mapv(|c| -c / p.gamma());
    let mut inc_row = Array2::<f64>::zeros((m, n));
    let mut inc_col = Array2::<f64>::zeros((m, n));
    let mut inc_pos = Array2::<f64>::zeros((m, n));
    let mut violation = f64::INFINITY;

    for _ in 0..cfg.max_cycles {
        let prev = x.clone();

        // Row constraints: subtract the row excess spread evenly.
        let mut y = &x + &inc_row;
        let excess = y.sum_axis(Axis(1)) - nu;
        for (mut row, e) in y.outer_iter_mut().zip(excess.iter()) {
            row -= *e / n as f64;
        }
        inc_row = &x + &inc_row - &y;
        x = y;

        let mut y = &x + &inc_col;
        let excess = y.sum_axis(Axis(0)) - mu;
        for (mut col, e) in y.axis_iter_mut(Axis(1)).zip(excess.iter()) {
            col -= *e / m as f64;
        }
        inc_col = &x + &inc_col - &y;
        x = y;

        let y = (&x + &inc_pos).mapv(|v| v.max(0.0));
        inc_pos = &x + &inc_pos - &y;
        x = y;

        let row_v = (x.sum_axis(Axis(1)) - nu).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let col_v = (x.sum_axis(Axis(0)) - mu).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let change = (&x - &prev).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        violation = row_v.max(col_v);
        if violation <= cfg.tolerance && change <= cfg.tolerance {
            return Ok(x);
        }
    }
    Err(Error::Oracle { cycles: cfg.max_cycles, violation })
}
