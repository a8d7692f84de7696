use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrot::experiments::{
    self, CompareSpec, EmpiricalRun, EmpiricalSpec, GammaSweepSpec, MarginalScaling, MeshSweepSpec, SolveSpec,
    SolverKind, SolverSettings,
};
use qrot::grid::{CostKind, LorentzianParams};
use qrot::{Error, SinkhornConfig};

#[derive(Parser)]
#[command(name = "qrot", version, about = "Quadratically regularized optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem given by marginal files and a cost
    Solve {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value = "squared")]
        cost: CostKind,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Solve for a list of regularization parameters on a grid
    GammaSweep {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "squared")]
        cost: CostKind,
        #[arg(long, default_value_t = 100)]
        size: usize,
        #[arg(long, value_delimiter = ',', default_value = "10,1,0.1,0.01")]
        gammas: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Iteration counts for discretizations of increasing size
    MeshSweep {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,50,100,500")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.001)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Transport between sampled point clouds in the plane
    Empirical {
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        clouds: CloudArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Quadratic versus entropic regularization on the same samples
    CompareSinkhorn {
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        clouds: CloudArgs,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.05)]
        gamma_ent: f64,
        #[arg(long, default_value_t = 1e-9)]
        sinkhorn_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        sinkhorn_max_iter: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "ssn")]
    solver: SolverKind,
    /// Marginal tolerance; for mesh-sweep the continuous one
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
}

impl SolverArgs {
    fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings::new(self.solver);
        if let Some(t) = self.tol {
            s = s.with_tolerance(t);
        }
        if let Some(n) = self.max_iter {
            s = s.with_max_iters(n);
        }
        if let Some(e) = self.epsilon {
            s.ssn.epsilon = e;
        }
        if let Some(t) = self.theta {
            s.ssn.theta = t;
        }
        if let Some(k) = self.kappa {
            s.ssn.kappa = k;
        }
        s
    }
}

#[derive(Args)]
struct CloudArgs {
    #[arg(long, default_value_t = 80)]
    n_source: usize,
    #[arg(long, default_value_t = 120)]
    n_target: usize,
    /// Covariance entries a,b,c of [[a,b],[b,c]]
    #[arg(long, value_delimiter = ',', num_args = 3)]
    covariance: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.8)]
    r_inner: f64,
    #[arg(long, default_value_t = 1.2)]
    r_outer: f64,
    #[arg(long, default_value_t = 0.0)]
    angle_start: f64,
    #[arg(long, default_value_t = 120.0)]
    angle_end: f64,
    #[arg(long, default_value = "probability")]
    scaling: MarginalScaling,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
}

impl CloudArgs {
    fn spec(&self) -> EmpiricalSpec {
        let mut spec = EmpiricalSpec {
            n_source: self.n_source,
            n_target: self.n_target,
            radius_inner: self.r_inner,
            radius_outer: self.r_outer,
            angle_start: self.angle_start,
            angle_end: self.angle_end,
            scaling: self.scaling,
            seed: self.seed,
            ..Default::default()
        };
        if let Some(c) = &self.covariance {
            spec.covariance = [[c[0], c[1]], [c[1], c[2]]];
        }
        spec
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Solve { solver, mu, nu, cost, gamma, out } => {
            let s = experiments::cmd_solve(&SolveSpec { mu, nu, cost, gamma, settings: solver.settings(), out })?;
            println!(
                "converged after {} iterations, nnz {}, residuals {:e} / {:e}, gap {:e}",
                s.iterations, s.nnz, s.residual_nu_inf, s.residual_mu_inf, s.duality_gap
            );
        }
        Command::GammaSweep { solver, cost, size, gammas, out } => {
            let spec = GammaSweepSpec { size, cost, gammas, marginals: LorentzianParams::default(), settings: solver.settings(), out };
            for r in experiments::cmd_gamma_sweep(&spec)? {
                println!("gamma {}: nnz {}, {} iterations", r.gamma, r.nnz, r.iterations);
            }
        }
        Command::MeshSweep { solver, sizes, gamma, instances, seed, out } => {
            let tolerance = solver.tol.unwrap_or(1e-3);
            let spec = MeshSweepSpec { sizes, gamma, tolerance, instances, seed, settings: solver.settings(), out };
            for r in experiments::cmd_mesh_sweep(&spec)? {
                println!("instance {} N {}: {} iterations", r.instance, r.n, r.iterations);
            }
        }
        Command::Empirical { solver, clouds, gamma, out } => {
            let run = EmpiricalRun { spec: clouds.spec(), gamma, settings: solver.settings(), bins: clouds.bins, out };
            let s = experiments::cmd_empirical(&run)?;
            println!("nnz {} of {}, {} iterations", s.nnz, s.rows * s.cols, s.iterations);
        }
        Command::CompareSinkhorn { solver, clouds, gamma, gamma_ent, sinkhorn_tol, sinkhorn_max_iter, out } => {
            let sinkhorn = SinkhornConfig { gamma_ent, tolerance: sinkhorn_tol, max_iters: sinkhorn_max_iter };
            let spec = CompareSpec { spec: clouds.spec(), gamma, sinkhorn, settings: solver.settings(), bins: clouds.bins, out };
            let c = experiments::cmd_compare_sinkhorn(&spec)?;
            println!(
                "quadratic nnz {} / entropic positive {} (above 1% of max: {}) of {}",
                c.quadratic_nnz, c.entropic_positive, c.entropic_above_1pct, c.entries
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
