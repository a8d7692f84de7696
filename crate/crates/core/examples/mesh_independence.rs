//! Iteration counts of both solvers as the grid is refined.

use qrot::experiments::{mesh_instances, mesh_solve, SolverKind, SolverSettings};

fn main() -> qrot::Result<()> {
    let (gamma, tol) = (1e-3, 1e-3);
    for params in mesh_instances(0, 2) {
        for kind in [SolverKind::Ssn, SolverKind::Nlgs] {
            let settings = SolverSettings::new(kind);
            let counts = [10, 50, 100, 500]
                .iter()
                .map(|&n| mesh_solve(&params, n, gamma, tol, &settings).map(|(r, _)| r.iterations))
                .collect::<qrot::Result<Vec<_>>>()?;
            println!("{kind:?}: {counts:?}");
        }
    }
    Ok(())
}
