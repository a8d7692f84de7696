//! Support size of the regularized plan for decreasing regularization.

use qrot::experiments::{gamma_sweep_problem, SolverSettings};
use qrot::grid::{CostKind, LorentzianParams};

fn main() -> qrot::Result<()> {
    let n = 100;
    let settings = SolverSettings::default();
    for cost in [CostKind::Squared, CostKind::SqrtAbs] {
        println!("{cost:?}");
        for gamma in [10.0, 1.0, 0.1, 0.01] {
            let p = gamma_sweep_problem(n, &cost, &LorentzianParams::default(), gamma)?;
            let r = settings.solve(&p)?;
            println!("  gamma {gamma:>5}: nnz {:>5} of {}, {} iterations", r.plan.nnz(), n * n, r.iterations);
        }
    }
    Ok(())
}
