//! Solves a 3 x 4 problem with both dual solvers and prints the plan.

use ndarray::array;
use qrot::{duality_gap, nlgs_solve_default, ssn_solve_default, DiscreteProblem, NlgsConfig, SsnConfig};

fn main() -> qrot::Result<()> {
    let cost = array![[0.0, 1.0, 4.0, 9.0], [1.0, 0.0, 1.0, 4.0], [4.0, 1.0, 0.0, 1.0]];
    let mu = array![0.25, 0.25, 0.25, 0.25];
    let nu = array![0.3, 0.3, 0.4];
    let p = DiscreteProblem::new(cost, mu, nu, 0.5)?;

    let ssn = ssn_solve_default(&p, &SsnConfig { tolerance: 1e-10, ..Default::default() })?;
    let nlgs = nlgs_solve_default(&p, &NlgsConfig { tolerance: 1e-10, ..Default::default() })?;
    println!("ssn:  {} iterations, gap {:e}", ssn.iterations, duality_gap(&p, &ssn.potentials)?);
    println!("nlgs: {} sweeps, gap {:e}", nlgs.iterations, duality_gap(&p, &nlgs.potentials)?);
    println!("plan (nnz {}):\n{:.4}", ssn.plan.nnz(), ssn.plan.to_dense());
    Ok(())
}
