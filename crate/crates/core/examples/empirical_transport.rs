//! Transport from a Gaussian cloud to an annular sector.

use qrot::experiments::empirical::{log_histogram, EmpiricalSpec};
use qrot::experiments::{empirical_problem, SolverSettings};

fn main() -> qrot::Result<()> {
    let spec = EmpiricalSpec::default();
    let (samples, p) = empirical_problem(&spec, 1.0)?;
    let r = SolverSettings::default().solve(&p)?;
    println!("{} targets x {} sources, nnz {}", p.rows(), p.cols(), r.plan.nnz());
    for &(i, j, v) in r.plan.entries().iter().take(5) {
        let (s, t) = (samples.source.row(j), samples.target.row(i));
        println!("  ({:.3}, {:.3}) -> ({:.3}, {:.3}) mass {v:.2e}", s[0], s[1], t[0], t[1]);
    }
    let masses: Vec<f64> = r.plan.entries().iter().map(|e| e.2).collect();
    for (lo, hi, count) in log_histogram(&masses, 8) {
        println!("  [{lo:.1e}, {hi:.1e}) {count}");
    }
    Ok(())
}
