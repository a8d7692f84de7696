//! Plain Sinkhorn scaling for entropically regularized transport.
//!
//! Works directly with the Gibbs kernel `exp(-c / gamma)` and no log-domain
//! stabilization, so small regularization parameters underflow and are
//! reported as [`Error::SinkhornUnstable`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinkhornConfig {
    pub gamma_ent: f64,
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { gamma_ent: 0.05, tolerance: 1e-9, max_iters: 100_000 }
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornReport {
    pub iterations: usize,
    pub converged: bool,
    pub residual_nu_inf: f64,
    pub residual_mu_inf: f64,
}

fn unstable(iteration: usize, what: &str) -> Error {
    Error::SinkhornUnstable { iteration, reason: format!("{what} is not finite and positive") }
}

fn scale(target: ArrayView1<'_, f64>, denom: &Array1<f64>) -> Option<Array1<f64>> {
    let out = Array1::from_iter(target.iter().zip(denom.iter()).map(|(t, d)| t / d));
    out.iter().all(|v| v.is_finite() && *v > 0.0).then_some(out)
}

/// Alternates `u = nu / (K v)` and `v = mu / (K^T u)` from `v = 1` until both
/// infinity-norm marginal residuals are at most the tolerance.
///
/// `cost` is `M x N`, `mu` has length `N` and `nu` length `M`, as for
/// [`crate::DiscreteProblem`]. Returns the dense plan `u_i K_ij v_j`.
pub fn sinkhorn_solve(
    cost: ArrayView2<'_, f64>,
    mu: ArrayView1<'_, f64>,
    nu: ArrayView1<'_, f64>,
    cfg: &SinkhornConfig,
) -> Result<(Array2<f64>, SinkhornReport)> {
    let (m, n) = cost.dim();
    if nu.len() != m || mu.len() != n {
        return Err(Error::Dimension(format!(
            "cost is {m} x {n} but marginals have lengths nu = {}, mu = {}",
            nu.len(),
            mu.len()
        )));
    }
    if !(cfg.gamma_ent > 0.0) || !(cfg.tolerance > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidInput("sinkhorn needs positive gamma_ent, tolerance and max_iters".into()));
    }
    if mu.iter().chain(nu.iter()).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("marginals must be positive".into()));
    }
    let (smu, snu) = (mu.sum(), nu.sum());
    if (smu - snu).abs() > crate::problem::MASS_BALANCE_TOL * smu.max(snu) {
        return Err(Error::InvalidInput(format!("mass mismatch: sum(mu) = {smu} but sum(nu) = {snu}")));
    }

    let kernel = cost.mapv(|c| (-c / cfg.gamma_ent).exp());
    let mut v = Array1::<f64>::ones(n);
    let mut u = Array1::<f64>::ones(m);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        u = scale(nu, &kernel.dot(&v)).ok_or_else(|| unstable(iterations, "row scaling"))?;
        let ktu = kernel.t().dot(&u);
        v = scale(mu, &ktu).ok_or_else(|| unstable(iterations, "column scaling"))?;
        // Columns are exact after the v-update; only rows can be off.
        let row = &u * &kernel.dot(&v);
        let rn = row.iter().zip(nu.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if rn <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    let plan = Array2::from_shape_fn((m, n), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    if plan.iter().any(|x| !x.is_finite()) {
        return Err(unstable(iterations, "plan"));
    }
    let rn = plan.sum_axis(ndarray::Axis(1)).iter().zip(nu.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let rm = plan.sum_axis(ndarray::Axis(0)).iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let converged = converged && rn <= cfg.tolerance && rm <= cfg.tolerance;
    Ok((plan, SinkhornReport { iterations, converged, residual_nu_inf: rn, residual_mu_inf: rm }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn constant_cost_gives_product_after_one_sweep() {
        let c = Array2::zeros((2, 2));
        let (plan, rep) = sinkhorn_solve(c.view(), array![1.0, 1.0].view(), array![1.0, 1.0].view(), &SinkhornConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for v in plan.iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_entry_is_forced() {
        let c = array![[3.7]];
        let (plan, rep) = sinkhorn_solve(c.view(), array![1.0].view(), array![1.0].view(), &SinkhornConfig::default()).unwrap();
        assert!(rep.converged);
        assert_abs_diff_eq!(plan[[0, 0]], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn tiny_regularization_underflows() {
        let c = array![[1.0, 2.0], [2.0, 1.0]];
        let cfg = SinkhornConfig { gamma_ent: 1e-4, ..Default::default() };
        let res = sinkhorn_solve(c.view(), array![1.0, 1.0].view(), array![1.0, 1.0].view(), &cfg);
        assert!(matches!(res, Err(Error::SinkhornUnstable { .. })));
    }

    #[test]
    fn plan_is_strictly_positive_and_feasible() {
        let c = Array2::from_shape_fn((4, 3), |(i, j)| ((i as f64) * 0.3 - (j as f64) * 0.4).powi(2));
        let mu = array![1.0, 2.0, 1.0];
        let nu = array![1.0, 1.0, 1.5, 0.5];
        let cfg = SinkhornConfig { gamma_ent: 0.1, tolerance: 1e-10, max_iters: 10_000 };
        let (plan, rep) = sinkhorn_solve(c.view(), mu.view(), nu.view(), &cfg).unwrap();
        assert!(rep.converged);
        assert!(plan.iter().all(|&v| v > 0.0));
        assert!(rep.residual_mu_inf <= 1e-10 && rep.residual_nu_inf <= 1e-10);
    }
}
