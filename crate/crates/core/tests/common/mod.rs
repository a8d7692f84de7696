#![allow(dead_code)]

use ndarray::{Array1, Array2};
use qrot::DiscreteProblem;
use rand::Rng;

/// Random balanced instance with positive marginals and costs in `[0, 1)`.
pub fn random_problem<R: Rng>(rng: &mut R, m: usize, n: usize, gamma: f64) -> DiscreteProblem {
    let cost = Array2::from_shape_fn((m, n), |_| rng.random::<f64>());
    let mu = Array1::from_shape_fn(n, |_| 0.1 + rng.random::<f64>());
    let mut nu = Array1::from_shape_fn(m, |_| 0.1 + rng.random::<f64>());
    nu *= mu.sum() / nu.sum();
    DiscreteProblem::new(cost, mu, nu, gamma).unwrap()
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}
