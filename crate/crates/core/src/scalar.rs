//! Root of `f(x) = sum_j (x - y_j)_+ = b` for `b > 0`.
//!
//! `f` is convex, piecewise linear and nondecreasing, with slope `k` on the
//! interval between the `k`-th and `(k+1)`-th smallest breakpoints, so for
//! `b > 0` the root is unique. This is the inner kernel of each Gauss-Seidel
//! half-sweep.

use crate::error::{Error, Result};

/// Which scalar method a Gauss-Seidel sweep uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScalarMethod {
    #[default]
    DirectSearch,
    ScalarNewton,
}

/// `sum_j (x - y_j)_+ = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarEquation {
    pub breakpoints: Vec<f64>,
    pub rhs: f64,
}

impl ScalarEquation {
    pub fn new(breakpoints: Vec<f64>, rhs: f64) -> Result<Self> {
        check(&breakpoints, rhs)?;
        Ok(Self { breakpoints, rhs })
    }

    pub fn eval(&self, x: f64) -> f64 {
        maxsum(&self.breakpoints, x)
    }

    pub fn solve(&self, method: ScalarMethod) -> Result<f64> {
        solve(&self.breakpoints, self.rhs, method)
    }
}

fn check(y: &[f64], b: f64) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Domain("scalar equation needs at least one breakpoint".into()));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!("right-hand side must be positive, got {b}")));
    }
    Ok(())
}

/// `f(x) = sum_j (x - y_j)_+`.
pub fn maxsum(y: &[f64], x: f64) -> f64 {
    y.iter().map(|&v| if x > v { x - v } else { 0.0 }).sum()
}

pub fn solve(y: &[f64], b: f64, method: ScalarMethod) -> Result<f64> {
    match method {
        ScalarMethod::DirectSearch => solve_direct_search(y, b),
        ScalarMethod::ScalarNewton => solve_scalar_newton(y, b).map(|s| s.root),
    }
}

/// Sorts the breakpoints, walks `f` along them to find the linear piece that
/// contains the root, then solves on that piece.
pub fn solve_direct_search(y: &[f64], b: f64) -> Result<f64> {
    check(y, b)?;
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    // f(y_[1]) = 0 <= b, so the piece index k is at least 1.
    let mut f_at = 0.0;
    let mut prefix = sorted[0];
    let mut k = 1;
    while k < sorted.len() {
        let next = f_at + k as f64 * (sorted[k] - sorted[k - 1]);
        if next > b {
            break;
        }
        f_at = next;
        prefix += sorted[k];
        k += 1;
    }
    Ok((b + prefix) / k as f64)
}

/// Result of the scalar semismooth Newton iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSolution {
    pub root: f64,
    /// Number of updates performed; never exceeds the number of breakpoints.
    pub steps: usize,
}

/// Semismooth Newton started at `max(y) + b/n`.
///
/// From there `f(x0) >= b` and the iterates decrease monotonically, each step
/// dropping at least one breakpoint from the active set.
pub fn solve_scalar_newton(y: &[f64], b: f64) -> Result<NewtonSolution> {
    newton_impl(y, b, |_| {})
}

/// As [`solve_scalar_newton`], also returning every iterate starting with `x0`.
pub fn solve_scalar_newton_traced(y: &[f64], b: f64) -> Result<(NewtonSolution, Vec<f64>)> {
    let mut iterates = Vec::new();
    let sol = newton_impl(y, b, |x| iterates.push(x))?;
    Ok((sol, iterates))
}

fn newton_impl(y: &[f64], b: f64, mut visit: impl FnMut(f64)) -> Result<NewtonSolution> {
    check(y, b)?;
    let n = y.len();
    let ymax = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-14 * b.max(1.0);

    let mut x = ymax + b / n as f64;
    visit(x);
    let mut steps = 0;
    loop {
        // Active set {j : x >= y_j}; f'(x) is its size.
        let (mut count, mut sum, mut fx) = (0usize, 0.0, 0.0);
        for &v in y {
            if x >= v {
                count += 1;
                sum += v;
                fx += x - v;
            }
        }
        if fx == b || (fx - b).abs() <= tol {
            break;
        }
        // x - (f(x) - b) / f'(x), written in the cancellation-free form.
        let next = (b + sum) / count as f64;
        if !(next < x) || steps == n {
            break;
        }
        x = next;
        steps += 1;
        visit(x);
    }
    Ok(NewtonSolution { root: x, steps })
}
