#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Quadratically regularized optimal transport between discrete measures.
//!
//! The primal problem
//! `min <c, pi> + gamma/2 |pi|^2` over nonnegative `pi` with row sums `nu`
//! and column sums `mu` has the concave dual in the potentials
//! `(alpha, beta)`; we minimize its negative
//! `Phi = 1/2 |(alpha (+) beta - c)_+|^2 - gamma <nu, alpha> - gamma <mu, beta>`
//! and recover the (sparse) plan as `(alpha (+) beta - c)_+ / gamma`.
//!
//! Two dual solvers are provided: [`nlgs`] (alternating exact minimization)
//! and [`ssn`] (globalized semismooth Newton). [`oracle`] is an independent
//! primal solver for small instances and [`sinkhorn`] the entropic baseline.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod nlgs;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod sinkhorn;
pub mod ssn;

pub use error::{Error, Result};
pub use nlgs::{nlgs_solve, nlgs_solve_default, NlgsConfig};
pub use oracle::{oracle_solve, OracleConfig};
pub use problem::{
    dual_gradient, dual_objective, duality_gap, marginal_residuals, normalize_gauge, plan_from_potentials,
    primal_objective, DiscreteProblem, DualPotentials, SolveReport, TraceRecord, TransportPlan,
};
pub use scalar::ScalarMethod;
pub use sinkhorn::{sinkhorn_solve, SinkhornConfig};
pub use ssn::{ssn_solve, ssn_solve_default, LinearSolver, SsnConfig};
