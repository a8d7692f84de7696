//! Solves sum_j (x - y_j)_+ = b by direct search and by scalar Newton.

use qrot::scalar::{maxsum, solve_direct_search, solve_scalar_newton_traced};

fn main() -> qrot::Result<()> {
    let y = [0.3, -1.0, 2.5, 0.0, 1.2];
    let b = 2.0;
    let direct = solve_direct_search(&y, b)?;
    let (newton, iterates) = solve_scalar_newton_traced(&y, b)?;
    println!("direct search: x = {direct}, f(x) = {}", maxsum(&y, direct));
    println!("newton:        x = {} after {} steps", newton.root, newton.steps);
    for (k, x) in iterates.iter().enumerate() {
        println!("  x_{k} = {x:.6}  f = {:.6}", maxsum(&y, *x));
    }
    Ok(())
}
