//! Sparsity of the quadratically regularized plan against the entropic one.

use qrot::experiments::empirical::EmpiricalSpec;
use qrot::experiments::{compare_plans, empirical_problem, SolverSettings};
use qrot::SinkhornConfig;

fn main() -> qrot::Result<()> {
    let (_, p) = empirical_problem(&EmpiricalSpec::default(), 1.0)?;
    let c = compare_plans(&p, &SolverSettings::default(), &SinkhornConfig::default())?.comparison;
    println!("entries            {}", c.entries);
    println!("quadratic nonzero  {} (above 1% of max: {})", c.quadratic_nnz, c.quadratic_above_1pct);
    println!("entropic positive  {} (above 1% of max: {})", c.entropic_positive, c.entropic_above_1pct);

    let tiny = SinkhornConfig { gamma_ent: 1e-4, ..Default::default() };
    match compare_plans(&p, &SolverSettings::default(), &tiny) {
        Ok(_) => println!("sinkhorn with gamma 1e-4 converged"),
        Err(e) => println!("sinkhorn with gamma 1e-4: {e}"),
    }
    Ok(())
}
