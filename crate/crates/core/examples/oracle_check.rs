//! Compares the dual solvers against the Dykstra projection oracle.

use ndarray::Array1;
use qrot::{nlgs_solve_default, oracle_solve, ssn_solve_default, DiscreteProblem, NlgsConfig, OracleConfig, SsnConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> qrot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, n) = (6, 5);
    let cost = ndarray::Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
    let mu = Array1::from_shape_fn(n, |_| 0.1 + rng.random::<f64>());
    let mut nu = Array1::from_shape_fn(m, |_| 0.1 + rng.random::<f64>());
    nu *= mu.sum() / nu.sum();
    for gamma in [0.01, 0.1, 1.0] {
        let p = DiscreteProblem::new(cost.clone(), mu.clone(), nu.clone(), gamma)?;
        let oracle = oracle_solve(&p, &OracleConfig::default())?;
        let ssn = ssn_solve_default(&p, &SsnConfig { tolerance: 1e-11, ..Default::default() })?.plan.to_dense();
        let nlgs = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-11, max_sweeps: 1_000_000, ..Default::default() })?;
        let (sweeps, nlgs) = (nlgs.iterations, nlgs.plan.to_dense());
        let diff = |a: &ndarray::Array2<f64>| (a - &oracle).iter().fold(0.0f64, |x, v| x.max(v.abs()));
        println!("gamma {gamma:>4}: |ssn - oracle| {:.1e}, |nlgs - oracle| {:.1e} ({sweeps} sweeps)", diff(&ssn), diff(&nlgs));
    }
    Ok(())
}
