mod common;

use nalgebra::{DMatrix, DVector};
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use qrot::grid::{self, LorentzianParams, MidpointCost};
use qrot::nlgs::{update_alpha, update_beta};
use qrot::scalar::{maxsum, solve_direct_search, solve_scalar_newton, solve_scalar_newton_traced};
use qrot::ssn::{ssn_solve_with_steps, ActivePattern, NewtonMatrix};
use qrot::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{max_abs_diff, random_problem};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_potentials(r: &mut ChaCha8Rng, m: usize, n: usize) -> DualPotentials {
    DualPotentials {
        alpha: Array1::from_shape_fn(m, |_| r.random_range(-0.5..1.5)),
        beta: Array1::from_shape_fn(n, |_| r.random_range(-0.5..1.5)),
    }
}

fn inf(a: &Array1<f64>) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=8, 1usize..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), (m, n) in dims(), lg in -2.0f64..1.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 10f64.powf(lg));
        let d = random_potentials(&mut r, m, n);
        let kink = (0..m).flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (d.alpha[i] + d.beta[j] - p.cost()[[i, j]]).abs())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(kink >= 1e-4);
        let h = 1e-6;
        let (g1, g2) = dual_gradient(&p, &d).unwrap();
        let grad: Vec<f64> = g1.iter().chain(g2.iter()).copied().collect();
        let scale = grad.iter().fold(1e-12f64, |a, v| a.max(v.abs()));
        for (k, g) in grad.iter().enumerate() {
            let at = |s: f64| {
                let mut e = d.clone();
                if k < m { e.alpha[k] += s } else { e.beta[k - m] += s }
                dual_objective(&p, &e).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            prop_assert!((fd - g).abs() <= 1e-5 * scale, "component {k}: {fd} vs {g}");
        }
    }

    #[test]
    fn dual_objective_is_midpoint_convex(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 0.5);
        let d1 = random_potentials(&mut r, m, n);
        let d2 = random_potentials(&mut r, m, n);
        let mid = DualPotentials { alpha: (&d1.alpha + &d2.alpha) / 2.0, beta: (&d1.beta + &d2.beta) / 2.0 };
        let (f1, f2) = (dual_objective(&p, &d1).unwrap(), dual_objective(&p, &d2).unwrap());
        let scale = 1.0 + f1.abs() + f2.abs();
        prop_assert!(dual_objective(&p, &mid).unwrap() <= (f1 + f2) / 2.0 + 1e-12 * scale);
    }

    #[test]
    fn gauge_shift_changes_nothing(seed in any::<u64>(), (m, n) in dims(), shift in -5.0f64..5.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 1.0);
        let d = random_potentials(&mut r, m, n);
        let e = DualPotentials { alpha: d.alpha.mapv(|a| a + shift), beta: d.beta.mapv(|b| b - shift) };
        let (f, g) = (dual_objective(&p, &d).unwrap(), dual_objective(&p, &e).unwrap());
        prop_assert!((f - g).abs() <= 1e-12 * (1.0 + f.abs() + shift.abs() * p.mass()));
        let (pd, pe) = (plan_from_potentials(&p, &d).unwrap(), plan_from_potentials(&p, &e).unwrap());
        let ed: Vec<(usize, usize)> = pd.entries().iter().map(|e| (e.0, e.1)).collect();
        let ee: Vec<(usize, usize)> = pe.entries().iter().map(|e| (e.0, e.1)).collect();
        // Rounding of alpha + C can move an entry across zero only when it is
        // within a few ulps of the kink.
        let kink = (0..m).flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (d.alpha[i] + d.beta[j] - p.cost()[[i, j]]).abs())
            .fold(f64::INFINITY, f64::min);
        if kink > 1e-12 {
            prop_assert_eq!(ed, ee);
        }
        prop_assert!(max_abs_diff(&pd.to_dense(), &pe.to_dense()) <= 1e-12 * (1.0 + shift.abs()) / p.gamma());
        let normalized = normalize_gauge(&d);
        prop_assert!(normalized.beta.sum().abs() <= 1e-12 * (1.0 + inf(&d.beta)) * n as f64);
    }

    #[test]
    fn gradient_is_lipschitz(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 0.3);
        let x = random_potentials(&mut r, m, n);
        let y = random_potentials(&mut r, m, n);
        let (fx1, fx2) = dual_gradient(&p, &x).unwrap();
        let (fy1, fy2) = dual_gradient(&p, &y).unwrap();
        let lhs = inf(&(&fx1 - &fy1)).max(inf(&(&fx2 - &fy2)));
        let dist = inf(&(&x.alpha - &y.alpha)).max(inf(&(&x.beta - &y.beta)));
        prop_assert!(lhs <= 2.0 * m.max(n) as f64 * dist + 1e-12);
    }

    #[test]
    fn residuals_are_scaled_gradient(seed in any::<u64>(), (m, n) in dims(), lg in -2.0f64..1.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 10f64.powf(lg));
        let d = random_potentials(&mut r, m, n);
        let (rn, rm) = marginal_residuals(&p, &plan_from_potentials(&p, &d).unwrap()).unwrap();
        let (f1, f2) = dual_gradient(&p, &d).unwrap();
        let g = p.gamma();
        prop_assert!((rn - inf(&f1) / g).abs() <= 1e-12 * (1.0 + rn));
        prop_assert!((rm - inf(&f2) / g).abs() <= 1e-12 * (1.0 + rm));
    }

    #[test]
    fn scalar_solvers_agree_and_verify(y in prop::collection::vec(-10.0f64..10.0, 1..=64), b in 1e-6f64..100.0) {
        let xd = solve_direct_search(&y, b).unwrap();
        let (xn, iterates) = solve_scalar_newton_traced(&y, b).unwrap();
        prop_assert!((xd - xn.root).abs() <= 1e-12 * xd.abs().max(1.0));
        prop_assert!((maxsum(&y, xd) - b).abs() <= 1e-12 * b.max(1.0));
        prop_assert!((maxsum(&y, xn.root) - b).abs() <= 1e-12 * b.max(1.0));
        prop_assert!(xn.steps <= y.len());
        prop_assert!(iterates.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn scalar_solution_translates(y in prop::collection::vec(-10.0f64..10.0, 1..=32), b in 1e-3f64..50.0, shift in -100.0f64..100.0) {
        let x = solve_direct_search(&y, b).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| v + shift).collect();
        let xs = solve_direct_search(&ys, b).unwrap();
        let xn = solve_scalar_newton(&ys, b).unwrap().root;
        let tol = 1e-12 * (x.abs() + shift.abs()).max(1.0) * 10.0;
        prop_assert!((xs - (x + shift)).abs() <= tol);
        prop_assert!((xn - (x + shift)).abs() <= tol);
    }

    #[test]
    fn newton_matrix_quadratic_form_and_kernel(seed in any::<u64>(), m in 1usize..=20, n in 1usize..=20, density in 0.0f64..1.0) {
        let mut r = rng(seed);
        let mask = Array2::from_shape_fn((m, n), |_| r.random::<f64>() < density);
        let g = NewtonMatrix::new(ActivePattern::from_dense(&mask), 0.0);
        let a = Array1::from_shape_fn(m, |_| r.random_range(-1.0..1.0));
        let b = Array1::from_shape_fn(n, |_| r.random_range(-1.0..1.0));
        let (ga, gb) = g.apply(a.view(), b.view());
        let q = a.dot(&ga) + b.dot(&gb);
        let expect: f64 = mask.indexed_iter().filter(|(_, &on)| on).map(|((i, j), _)| (a[i] + b[j]).powi(2)).sum();
        prop_assert!((q - expect).abs() <= 1e-10 * (1.0 + expect));
        prop_assert!(q >= 0.0);
        // Symmetry: <x, G y> = <G x, y>.
        let c = Array1::from_shape_fn(m, |_| r.random_range(-1.0..1.0));
        let d = Array1::from_shape_fn(n, |_| r.random_range(-1.0..1.0));
        let (gc, gd) = g.apply(c.view(), d.view());
        prop_assert!((a.dot(&gc) + b.dot(&gd) - (ga.dot(&c) + gb.dot(&d))).abs() <= 1e-12 * (1.0 + q));
        let (ka, kb) = g.apply(Array1::ones(m).view(), Array1::from_elem(n, -1.0).view());
        prop_assert!(ka.iter().chain(kb.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn nlgs_half_sweeps_descend_and_are_feasible(seed in any::<u64>(), (m, n) in dims(), lg in -2.0f64..1.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 10f64.powf(lg));
        let mut d = DualPotentials::zeros(m, n);
        let mut phi = dual_objective(&p, &d).unwrap();
        let nu_inf = p.nu().iter().fold(0.0f64, |a, v| a.max(*v));
        let mu_inf = p.mu().iter().fold(0.0f64, |a, v| a.max(*v));
        for _ in 0..30 {
            d.alpha = update_alpha(&p, d.beta.view(), ScalarMethod::DirectSearch).unwrap();
            let (rn, _) = marginal_residuals(&p, &plan_from_potentials(&p, &d).unwrap()).unwrap();
            prop_assert!(rn <= 1e-10 * nu_inf);
            let phi_a = dual_objective(&p, &d).unwrap();
            prop_assert!(phi_a <= phi + 1e-10 * (1.0 + phi.abs()));
            d.beta = update_beta(&p, d.alpha.view(), ScalarMethod::DirectSearch).unwrap();
            let (_, rm) = marginal_residuals(&p, &plan_from_potentials(&p, &d).unwrap()).unwrap();
            prop_assert!(rm <= 1e-10 * mu_inf);
            let phi_b = dual_objective(&p, &d).unwrap();
            prop_assert!(phi_b <= phi_a + 1e-10 * (1.0 + phi_a.abs()));
            phi = phi_b;
        }
    }

    #[test]
    fn nlgs_trace_descends_and_methods_agree(seed in any::<u64>(), (m, n) in dims()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 0.5);
        let direct = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-11, ..Default::default() }).unwrap();
        let newton = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-11, scalar_method: ScalarMethod::ScalarNewton, ..Default::default() }).unwrap();
        prop_assert!(direct.converged && newton.converged);
        for w in direct.trace.windows(2) {
            prop_assert!(w[1].phi <= w[0].phi + 1e-10 * (1.0 + w[0].phi.abs()));
        }
        prop_assert!(max_abs_diff(&direct.plan.to_dense(), &newton.plan.to_dense()) <= 1e-8);
        let again = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-11, ..Default::default() }).unwrap();
        prop_assert_eq!(direct.plan, again.plan);
        prop_assert_eq!(direct.potentials, again.potentials);
    }

    #[test]
    fn ssn_steps_satisfy_armijo_and_terminate_in_kkt(seed in any::<u64>(), (m, n) in dims(), lg in -2.0f64..1.0, direct in any::<bool>()) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 10f64.powf(lg));
        let cfg = SsnConfig {
            linear_solver: if direct { LinearSolver::DirectSparse } else { LinearSolver::ConjugateGradient },
            ..Default::default()
        };
        let (report, steps) = ssn_solve_with_steps(&p, &DualPotentials::zeros(m, n), &cfg).unwrap();
        prop_assert!(report.converged);
        for (s, w) in steps.iter().zip(report.trace.windows(2)) {
            prop_assert!(s.directional_derivative < 0.0);
            prop_assert!(s.objective_change < s.step_length * cfg.theta * s.directional_derivative);
            prop_assert!(w[1].phi <= w[0].phi + 1e-12 * (1.0 + w[0].phi.abs()));
        }
        let (f1, f2) = dual_gradient(&p, &report.potentials).unwrap();
        prop_assert!(inf(&f1) <= cfg.tolerance * p.gamma() * (1.0 + 1e-12));
        prop_assert!(inf(&f2) <= cfg.tolerance * p.gamma() * (1.0 + 1e-12));
    }

    #[test]
    fn solvers_match_oracle(seed in any::<u64>(), m in 2usize..=8, n in 2usize..=8, gi in 0usize..3) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, [0.1, 1.0, 10.0][gi]);
        let reference = oracle_solve(&p, &OracleConfig::default()).unwrap();
        let ssn = ssn_solve_default(&p, &SsnConfig { tolerance: 1e-10, ..Default::default() }).unwrap();
        let nlgs = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-10, max_sweeps: 1_000_000, ..Default::default() }).unwrap();
        prop_assert!(ssn.converged && nlgs.converged);
        prop_assert!(max_abs_diff(&ssn.plan.to_dense(), &reference) <= 1e-6);
        prop_assert!(max_abs_diff(&nlgs.plan.to_dense(), &reference) <= 1e-6);
    }

    #[test]
    fn oracle_plan_admits_kkt_potentials(seed in any::<u64>(), m in 2usize..=6, n in 2usize..=6) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 0.5);
        let plan = oracle_solve(&p, &OracleConfig::default()).unwrap();
        let support: Vec<(usize, usize)> = plan.indexed_iter().filter(|(_, &v)| v > 1e-9).map(|(ij, _)| ij).collect();
        // alpha_i + beta_j = c_ij + gamma pi_ij on the support, least squares
        // with the gauge fixed by beta_n = 0.
        let k = m + n - 1;
        let a = DMatrix::from_fn(support.len(), k, |row, l| {
            let (i, j) = support[row];
            if l == i || l == m + j { 1.0 } else { 0.0 }
        });
        let rhs = DVector::from_iterator(support.len(), support.iter().map(|&(i, j)| p.cost()[[i, j]] + p.gamma() * plan[[i, j]]));
        let normal = a.transpose() * &a;
        let connected = normal.clone().cholesky().is_some();
        let reg = if connected { normal } else { normal + DMatrix::identity(k, k) * 1e-10 };
        let x = reg.cholesky().unwrap().solve(&(a.transpose() * &rhs));
        let fit = (&a * &x - &rhs).amax();
        prop_assert!(fit <= 1e-6, "support equations violated by {fit}");
        if connected {
            let pot = |l: usize| if l < k { x[l] } else { 0.0 };
            for ((i, j), &v) in plan.indexed_iter() {
                if v <= 1e-9 {
                    prop_assert!(pot(i) + pot(m + j) - p.cost()[[i, j]] <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn sinkhorn_plans_are_positive_and_feasible(seed in any::<u64>(), (m, n) in dims(), g in 0.05f64..1.0) {
        let mut r = rng(seed);
        let p = random_problem(&mut r, m, n, 1.0);
        let cfg = SinkhornConfig { gamma_ent: g, tolerance: 1e-9, max_iters: 200_000 };
        let (plan, rep) = sinkhorn_solve(p.cost(), p.mu(), p.nu(), &cfg).unwrap();
        prop_assert!(plan.iter().all(|&v| v > 0.0));
        if rep.converged {
            prop_assert!(rep.residual_nu_inf <= 1e-9 && rep.residual_mu_inf <= 1e-9);
        }
    }

    #[test]
    fn lorentzian_marginals_are_balanced(n in 1usize..300, seed in any::<u64>()) {
        let params = LorentzianParams::random(&mut rng(seed));
        prop_assert!(grid::lorentzian_problem(&params, n, 0.01).is_ok());
        let (mu, nu) = grid::lorentzian_marginals(&params, n).unwrap();
        prop_assert!((mu.sum() - n as f64).abs() <= 1e-12 * n as f64);
        prop_assert!((nu.sum() - n as f64).abs() <= 1e-12 * n as f64);
    }
}

#[test]
fn exact_and_midpoint_squared_cost_differ_by_constant() {
    for n in [2, 10, 100, 400] {
        let e = grid::squared_cost_coefficients(n);
        let m = grid::midpoint_cost_coefficients(n, MidpointCost::Squared);
        let expect = 1.0 / (6.0 * (n * n) as f64);
        for (a, b) in e.iter().zip(m.iter()) {
            assert!(((a - b) - expect).abs() <= 1e-14);
        }
    }
}

#[test]
fn scaled_tolerance_bounds_the_continuous_l1_residual() {
    let params = LorentzianParams::default();
    for n in [10, 50, 200] {
        for tau in [1e-2, 1e-3] {
            let tau_bar = tau * n as f64;
            let p = grid::lorentzian_problem(&params, n, 0.001).unwrap();
            let r = ssn_solve_default(&p, &SsnConfig { tolerance: tau_bar, ..Default::default() }).unwrap();
            assert!(r.converged);
            let l1 = grid::row_marginal_l1(&r.plan.row_sums(), &p.nu().to_owned());
            assert!(l1 <= tau_bar / n as f64, "N={n}: {l1} > {}", tau_bar / n as f64);
        }
    }
}

/// Two-cell grid whose dual has a one-parameter family of solutions that are
/// not related by the constant shift.
#[test]
fn dual_solutions_are_not_unique_beyond_the_gauge() {
    let big = 10.0;
    let p = DiscreteProblem::new(array![[0.0, 0.0], [0.0, big]], array![2.0, 2.0], array![2.0, 2.0], 1.0).unwrap();
    let expect = array![[0.0, 2.0], [2.0, 0.0]];
    let mut invariants = Vec::new();
    for s in [0.0, 1.0, 3.0, 5.5] {
        let a = 0.7;
        let d = DualPotentials::new(array![a, 2.0 + s + a], array![-s - a, 2.0 - a]).unwrap();
        let (f1, f2) = dual_gradient(&p, &d).unwrap();
        assert!(f1.iter().chain(f2.iter()).all(|v| v.abs() <= 1e-14), "s = {s}");
        assert!(max_abs_diff(&plan_from_potentials(&p, &d).unwrap().to_dense(), &expect) <= 1e-14);
        assert!(duality_gap(&p, &d).unwrap().abs() <= 1e-12);
        invariants.push(d.alpha[0] + d.beta[0]);
    }
    // alpha_1 + beta_1 is gauge invariant, so these are genuinely different.
    assert!(invariants.windows(2).all(|w| w[0] != w[1]));
    for r in [
        ssn_solve_default(&p, &SsnConfig { tolerance: 1e-12, ..Default::default() }).unwrap(),
        nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-12, ..Default::default() }).unwrap(),
    ] {
        assert!(max_abs_diff(&r.plan.to_dense(), &expect) <= 1e-9);
    }
}
