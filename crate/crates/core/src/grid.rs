//! Piecewise-constant discretization of transport problems on `[0, 1]`.
//!
//! Functions on `[0, 1]` are represented by their averages over the `N` cells
//! `(i/N, (i+1)/N)`. A continuous density with unit mass therefore has
//! coefficients summing to `N`. The solver works on rescaled quantities,
//! see [`map_quantity`].

use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::problem::DiscreteProblem;

/// Ground cost on `[0, 1] x [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub enum CostKind {
    /// `(x - y)^2`, discretized by its exact cell average.
    Squared,
    /// `|x - y|` at cell midpoints.
    Absolute,
    /// `sqrt(|x - y|)` at cell midpoints.
    SqrtAbs,
    /// Dense CSV matrix.
    FromFile(PathBuf),
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(CostKind::Squared),
            "absolute" => Ok(CostKind::Absolute),
            "sqrt_abs" => Ok(CostKind::SqrtAbs),
            _ => match s.strip_prefix("file=") {
                Some(path) if !path.is_empty() => Ok(CostKind::FromFile(PathBuf::from(path))),
                _ => Err(Error::Parse(format!(
                    "unknown cost '{s}' (expected squared, absolute, sqrt_abs or file=PATH)"
                ))),
            },
        }
    }
}

/// Equidistant grid with `n_cells` cells and a cost.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub n_cells: usize,
    pub cost_kind: CostKind,
}

impl GridSpec {
    pub fn new(n_cells: usize, cost_kind: CostKind) -> Result<Self> {
        if n_cells == 0 {
            return Err(Error::InvalidInput("grid needs at least one cell".into()));
        }
        Ok(Self { n_cells, cost_kind })
    }

    /// `n_cells x n_cells` cost coefficients.
    pub fn cost_matrix(&self) -> Result<Array2<f64>> {
        let n = self.n_cells;
        match &self.cost_kind {
            CostKind::Squared => Ok(squared_cost_coefficients(n)),
            CostKind::Absolute => Ok(midpoint_cost_coefficients(n, MidpointCost::Absolute)),
            CostKind::SqrtAbs => Ok(midpoint_cost_coefficients(n, MidpointCost::SqrtAbs)),
            CostKind::FromFile(path) => {
                let c = crate::experiments::io::read_matrix(path)?;
                if c.dim() != (n, n) {
                    return Err(Error::Dimension(format!(
                        "cost file {} is {:?}, expected {n} x {n}",
                        path.display(),
                        c.dim()
                    )));
                }
                Ok(c)
            }
        }
    }
}

/// Exact cell averages of `(x - y)^2`: `((i - j)^2 + 1/6) / N^2`.
pub fn squared_cost_coefficients(n: usize) -> Array2<f64> {
    let n2 = (n * n) as f64;
    Array2::from_shape_fn((n, n), |(i, j)| {
        let d = i as f64 - j as f64;
        (d * d + 1.0 / 6.0) / n2
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MidpointCost {
    Absolute,
    SqrtAbs,
    Squared,
}

/// `kind(|m_i - m_j|)` at cell midpoints `m_i = (i + 1/2) / N`.
pub fn midpoint_cost_coefficients(n: usize, kind: MidpointCost) -> Array2<f64> {
    rect_midpoint_cost(n, n, kind)
}

/// Midpoint cost between an `m`-cell grid (rows) and an `n`-cell grid (columns).
pub fn rect_midpoint_cost(m: usize, n: usize, kind: MidpointCost) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |(i, j)| {
        let d = ((i as f64 + 0.5) / m as f64 - (j as f64 + 0.5) / n as f64).abs();
        match kind {
            MidpointCost::Absolute => d,
            MidpointCost::SqrtAbs => d.sqrt(),
            MidpointCost::Squared => d * d,
        }
    })
}

/// Midpoint-rule cell averages of a nonnegative density, rescaled to sum to `n`.
pub fn discretize_marginal(f: impl Fn(f64) -> f64, n: usize) -> Result<Array1<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("grid needs at least one cell".into()));
    }
    let raw = Array1::from_iter((0..n).map(|i| f((i as f64 + 0.5) / n as f64)));
    if let Some((i, v)) = raw.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("density is {v} at midpoint of cell {i}")));
    }
    let total = raw.sum();
    if !(total > 0.0) {
        return Err(Error::Domain("density vanishes at every midpoint".into()));
    }
    Ok(raw * (n as f64 / total))
}

/// Widths `m`, `m1`, `m2 > 0` and centers `a`, `a1`, `a2` in `(0, 1)` of the
/// single-peak and double-peak Lorentzian marginals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzianParams {
    pub m: f64,
    pub a: f64,
    pub m1: f64,
    pub a1: f64,
    pub m2: f64,
    pub a2: f64,
}

impl Default for LorentzianParams {
    fn default() -> Self {
        Self { m: 50.0, a: 0.35, m1: 200.0, a1: 0.25, m2: 80.0, a2: 0.7 }
    }
}

impl LorentzianParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("m1", self.m1), ("m2", self.m2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("a", self.a), ("a1", self.a1), ("a2", self.a2)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    /// Widths log-uniform in `[10, 300]`, centers uniform in `[0.15, 0.85]`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut width = || 10f64 * 30f64.powf(rng.random::<f64>());
        let (m, m1, m2) = (width(), width(), width());
        let mut center = || 0.15 + 0.7 * rng.random::<f64>();
        Self { m, a: center(), m1, a1: center(), m2, a2: center() }
    }

    pub fn single(&self, x: f64) -> f64 {
        1.0 / (1.0 + self.m * (x - self.a).powi(2))
    }

    pub fn double(&self, x: f64) -> f64 {
        1.0 / (1.0 + self.m1 * (x - self.a1).powi(2)) + 1.0 / (1.0 + self.m2 * (x - self.a2).powi(2))
    }
}

/// Discretized `(mu, nu)`: `mu` from the single-peak density, `nu` from the
/// double-peak one. Both sum to `n`.
pub fn lorentzian_marginals(params: &LorentzianParams, n: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    params.validate()?;
    Ok((discretize_marginal(|x| params.single(x), n)?, discretize_marginal(|x| params.double(x), n)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Plan,
    Cost,
    Mu,
    Nu,
    Alpha,
    Beta,
    Objective,
    Tolerance,
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "plan" => Quantity::Plan,
            "cost" => Quantity::Cost,
            "mu" => Quantity::Mu,
            "nu" => Quantity::Nu,
            "alpha" => Quantity::Alpha,
            "beta" => Quantity::Beta,
            "objective" => Quantity::Objective,
            "tolerance" => Quantity::Tolerance,
            other => return Err(Error::Parse(format!("unknown quantity '{other}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToSolver,
    FromSolver,
}

/// Converts between discretization coefficients and solver quantities.
///
/// | quantity   | solver value      |
/// |------------|-------------------|
/// | plan       | `gamma * pi`      |
/// | cost       | `c`               |
/// | mu, nu     | `N * mu`          |
/// | alpha/beta | unchanged         |
/// | objective  | `J * N^2 * gamma` |
/// | tolerance  | `tau * N`         |
///
/// The solver-side plan here is the unscaled positive part
/// `(alpha (+) beta - c)_+`; the plans returned by the solvers are that
/// divided by `gamma`, so they already equal the coefficients `pi`.
pub fn map_quantity(q: Quantity, value: f64, n: usize, gamma: f64, direction: Direction) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("grid needs at least one cell".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let nf = n as f64;
    let factor = match q {
        Quantity::Plan => gamma,
        Quantity::Cost | Quantity::Alpha | Quantity::Beta => 1.0,
        Quantity::Mu | Quantity::Nu => nf,
        Quantity::Objective => nf * nf * gamma,
        Quantity::Tolerance => nf,
    };
    Ok(match direction {
        Direction::ToSolver => value * factor,
        Direction::FromSolver => value / factor,
    })
}

/// String-tagged form of [`map_quantity`].
pub fn map_quantities(tag: &str, value: f64, n: usize, gamma: f64, direction: Direction) -> Result<f64> {
    map_quantity(tag.parse()?, value, n, gamma, direction)
}

/// Solver-scaled problem for the Lorentzian family with squared cost on an
/// `n`-cell grid: cost coefficients unchanged, marginals multiplied by `n`.
pub fn lorentzian_problem(params: &LorentzianParams, n: usize, gamma: f64) -> Result<DiscreteProblem> {
    let (mu, nu) = lorentzian_marginals(params, n)?;
    let nf = n as f64;
    DiscreteProblem::new(squared_cost_coefficients(n), mu * nf, nu * nf, gamma)
}

/// `sum_i (1/N) |(1/N) sum_j pi_ij - nu_i|`, the L1 distance between the row
/// marginal of the piecewise-constant plan and the target density, given
/// solver-scaled row sums and marginal.
pub fn row_marginal_l1(row_sums: &Array1<f64>, solver_nu: &Array1<f64>) -> f64 {
    let n = row_sums.len() as f64;
    row_sums.iter().zip(solver_nu.iter()).map(|(s, v)| (s - v).abs()).sum::<f64>() / (n * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn squared_cost_examples() {
        assert_eq!(squared_cost_coefficients(1)[[0, 0]], 1.0 / 6.0);
        assert_abs_diff_eq!(squared_cost_coefficients(2)[[0, 1]], 7.0 / 24.0, epsilon = 1e-16);
        for n in [1, 3, 8] {
            let c = squared_cost_coefficients(n);
            for i in 0..n {
                assert_eq!(c[[i, i]], 1.0 / 6.0 / (n * n) as f64);
                for j in 0..n {
                    assert_eq!(c[[i, j]], c[[j, i]]);
                }
            }
        }
    }

    #[test]
    fn midpoint_cost_examples() {
        assert_eq!(midpoint_cost_coefficients(2, MidpointCost::Absolute)[[0, 1]], 0.5);
        assert_eq!(midpoint_cost_coefficients(2, MidpointCost::SqrtAbs)[[0, 1]], 0.5f64.sqrt());
        for kind in [MidpointCost::Absolute, MidpointCost::SqrtAbs, MidpointCost::Squared] {
            let c = midpoint_cost_coefficients(5, kind);
            assert!(c.diag().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn marginal_examples() {
        assert_eq!(discretize_marginal(|_| 1.0, 4).unwrap(), Array1::from(vec![1.0; 4]));
        let v = discretize_marginal(|x| 2.0 * x, 2).unwrap();
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.5, epsilon = 1e-15);
        let p = LorentzianParams::default();
        let a = discretize_marginal(|x| 3.0 * p.single(x), 7).unwrap();
        let b = discretize_marginal(|x| 0.01 * p.single(x), 7).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        assert!(matches!(discretize_marginal(|x| x - 0.5, 4), Err(Error::Domain(_))));
        assert!(discretize_marginal(|_| 0.0, 4).is_err());
    }

    #[test]
    fn lorentzian_examples() {
        let flat = LorentzianParams { m: 1e-12, ..Default::default() };
        let (mu, nu) = lorentzian_marginals(&flat, 6).unwrap();
        assert!(mu.iter().all(|&v| (v - 1.0).abs() < 1e-10));
        assert_abs_diff_eq!(nu.sum(), 6.0, epsilon = 1e-12);

        let sym = LorentzianParams { a: 0.5, m: 37.0, ..Default::default() };
        let (mu, _) = lorentzian_marginals(&sym, 8).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(mu[i], mu[7 - i], epsilon = 1e-14);
        }

        let peaked = LorentzianParams { m: 100.0, a: 0.3, ..Default::default() };
        let (mu, _) = lorentzian_marginals(&peaked, 10).unwrap();
        let argmax = mu.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).unwrap().0;
        assert_eq!(argmax, 3);

        let bad = LorentzianParams { a1: 1.0, ..Default::default() };
        assert!(lorentzian_marginals(&bad, 4).is_err());
    }

    #[test]
    fn random_params_are_valid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            LorentzianParams::random(&mut rng).validate().unwrap();
        }
    }

    #[test]
    fn quantity_map_examples() {
        let tau = map_quantities("tolerance", 1e-3, 100, 1.0, Direction::ToSolver).unwrap();
        assert_abs_diff_eq!(tau, 0.1, epsilon = 1e-16);
        assert_eq!(map_quantities("plan", 3.0, 10, 0.5, Direction::ToSolver).unwrap(), 1.5);
        assert_eq!(map_quantities("objective", 2.0, 10, 0.5, Direction::ToSolver).unwrap(), 100.0);
        assert_eq!(map_quantities("alpha", -4.0, 10, 0.5, Direction::FromSolver).unwrap(), -4.0);
        assert!(matches!(map_quantities("entropy", 1.0, 10, 1.0, Direction::ToSolver), Err(Error::Parse(_))));
        assert!(map_quantity(Quantity::Mu, 1.0, 0, 1.0, Direction::ToSolver).is_err());
    }

    #[test]
    fn cost_kind_parsing() {
        assert_eq!("squared".parse::<CostKind>().unwrap(), CostKind::Squared);
        assert_eq!("sqrt_abs".parse::<CostKind>().unwrap(), CostKind::SqrtAbs);
        assert_eq!("file=c.csv".parse::<CostKind>().unwrap(), CostKind::FromFile("c.csv".into()));
        assert!("file=".parse::<CostKind>().is_err());
        assert!("cubic".parse::<CostKind>().is_err());
    }
}
