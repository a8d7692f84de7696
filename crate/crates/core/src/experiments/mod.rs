//! The command-line experiments as library functions.
//!
//! Every command writes its files into an output directory and returns the
//! data it wrote. Solver non-convergence is reported as an error after the
//! files have been written.

pub mod empirical;
pub mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{self, CostKind, Direction, GridSpec, LorentzianParams, MidpointCost, Quantity};
use crate::nlgs::{nlgs_solve_default, NlgsConfig};
use crate::problem::{duality_gap, DiscreteProblem, SolveReport, TransportPlan};
use crate::sinkhorn::{sinkhorn_solve, SinkhornConfig, SinkhornReport};
use crate::ssn::{ssn_solve_default, SsnConfig};

pub use empirical::{EmpiricalSpec, MarginalScaling, Samples};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Ssn,
    Nlgs,
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssn" => Ok(Self::Ssn),
            "nlgs" => Ok(Self::Nlgs),
            other => Err(Error::Parse(format!("unknown solver '{other}' (expected ssn or nlgs)"))),
        }
    }
}

/// Which solver to run and the configuration of each.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverSettings {
    pub kind: SolverKind,
    pub ssn: SsnConfig,
    pub nlgs: NlgsConfig,
}

impl SolverSettings {
    pub fn new(kind: SolverKind) -> Self {
        Self { kind, ..Default::default() }
    }

    pub fn tolerance(&self) -> f64 {
        match self.kind {
            SolverKind::Ssn => self.ssn.tolerance,
            SolverKind::Nlgs => self.nlgs.tolerance,
        }
    }

    /// Sets the stopping tolerance of both solvers.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.ssn.tolerance = tol;
        self.nlgs.tolerance = tol;
        self
    }

    /// Sets the iteration limit of both solvers.
    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.ssn.max_iters = n;
        self.nlgs.max_sweeps = n;
        self
    }

    /// Solves from zero potentials.
    pub fn solve(&self, p: &DiscreteProblem) -> Result<SolveReport> {
        match self.kind {
            SolverKind::Ssn => ssn_solve_default(p, &self.ssn),
            SolverKind::Nlgs => nlgs_solve_default(p, &self.nlgs),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub solver: SolverKind,
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub phi: f64,
    pub residual_nu_inf: f64,
    pub residual_mu_inf: f64,
    pub duality_gap: f64,
    pub nnz: usize,
}

impl SolveSummary {
    pub fn new(p: &DiscreteProblem, settings: &SolverSettings, r: &SolveReport) -> Result<Self> {
        let last = r.final_record();
        Ok(Self {
            solver: settings.kind,
            rows: p.rows(),
            cols: p.cols(),
            gamma: p.gamma(),
            tolerance: settings.tolerance(),
            converged: r.converged,
            iterations: r.iterations,
            phi: last.phi,
            residual_nu_inf: last.residual_nu_inf,
            residual_mu_inf: last.residual_mu_inf,
            duality_gap: duality_gap(p, &r.potentials)?,
            nnz: r.plan.nnz(),
        })
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::InvalidInput(format!("cannot create {}: {e}", dir.display())))
}

fn not_converged(r: &SolveReport) -> Error {
    Error::NotConverged { iterations: r.iterations }
}

/// Cost matrix for `m` rows and `n` columns. Generated kinds live on `[0, 1]`;
/// `squared` uses exact cell averages when `m == n` and midpoints otherwise.
pub fn build_cost(kind: &CostKind, m: usize, n: usize) -> Result<Array2<f64>> {
    match kind {
        CostKind::FromFile(path) => {
            let c = io::read_matrix(path)?;
            if c.dim() != (m, n) {
                return Err(Error::Dimension(format!("cost file {} is {:?}, expected {m} x {n}", path.display(), c.dim())));
            }
            Ok(c)
        }
        _ if m == n => GridSpec::new(n, kind.clone())?.cost_matrix(),
        CostKind::Squared => Ok(grid::rect_midpoint_cost(m, n, MidpointCost::Squared)),
        CostKind::Absolute => Ok(grid::rect_midpoint_cost(m, n, MidpointCost::Absolute)),
        CostKind::SqrtAbs => Ok(grid::rect_midpoint_cost(m, n, MidpointCost::SqrtAbs)),
    }
}

/// Writes `plan.csv`, `potentials.csv`, `trace.csv` and `summary.json`.
pub fn write_solution(dir: &Path, p: &DiscreteProblem, settings: &SolverSettings, r: &SolveReport) -> Result<SolveSummary> {
    prepare_dir(dir)?;
    io::write_plan(dir.join("plan.csv"), &r.plan)?;
    io::write_potentials(dir.join("potentials.csv"), &r.potentials)?;
    io::write_trace(dir.join("trace.csv"), &r.trace)?;
    let summary = SolveSummary::new(p, settings, r)?;
    io::write_json(dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct SolveSpec {
    /// Column marginal, one value per line.
    pub mu: PathBuf,
    /// Row marginal, one value per line.
    pub nu: PathBuf,
    pub cost: CostKind,
    pub gamma: f64,
    pub settings: SolverSettings,
    pub out: PathBuf,
}

/// Solves a problem given by marginal files and a cost.
pub fn cmd_solve(spec: &SolveSpec) -> Result<SolveSummary> {
    let mu = io::read_vector(&spec.mu)?;
    let nu = io::read_vector(&spec.nu)?;
    let cost = build_cost(&spec.cost, nu.len(), mu.len())?;
    let p = DiscreteProblem::new(cost, mu, nu, spec.gamma)?;
    let r = spec.settings.solve(&p)?;
    let summary = write_solution(&spec.out, &p, &spec.settings, &r)?;
    if !r.converged {
        return Err(not_converged(&r));
    }
    Ok(summary)
}

#[derive(Clone, Debug)]
pub struct GammaSweepSpec {
    pub size: usize,
    pub cost: CostKind,
    pub gammas: Vec<f64>,
    pub marginals: LorentzianParams,
    pub settings: SolverSettings,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaSweepRow {
    pub gamma: f64,
    pub nnz: usize,
    pub iterations: usize,
    pub converged: bool,
    pub residual_nu_inf: f64,
    pub residual_mu_inf: f64,
}

pub const GAMMA_SWEEP_HEADER: &str = "gamma,nnz,iterations,converged,res_nu,res_mu";

/// Density samples of the Lorentzian marginals (summing to `size`) and the
/// chosen cost on `[0, 1]`.
pub fn gamma_sweep_problem(size: usize, cost: &CostKind, marginals: &LorentzianParams, gamma: f64) -> Result<DiscreteProblem> {
    let c = GridSpec::new(size, cost.clone())?.cost_matrix()?;
    let (mu, nu) = grid::lorentzian_marginals(marginals, size)?;
    DiscreteProblem::new(c, mu, nu, gamma)
}

/// Solves one problem per `gamma`, writing `plan_XX.pgm` and `sweep.csv`.
pub fn cmd_gamma_sweep(spec: &GammaSweepSpec) -> Result<Vec<GammaSweepRow>> {
    if spec.gammas.is_empty() {
        return Err(Error::InvalidInput("gamma list is empty".into()));
    }
    let base = gamma_sweep_problem(spec.size, &spec.cost, &spec.marginals, spec.gammas[0])?;
    prepare_dir(&spec.out)?;
    let mut rows = Vec::new();
    for (k, &gamma) in spec.gammas.iter().enumerate() {
        let p = base.with_gamma(gamma)?;
        let r = spec.settings.solve(&p)?;
        io::write_pgm(spec.out.join(format!("plan_{k:02}.pgm")), &r.plan.to_dense())?;
        let last = r.final_record();
        rows.push(GammaSweepRow {
            gamma,
            nnz: r.plan.nnz(),
            iterations: r.iterations,
            converged: r.converged,
            residual_nu_inf: last.residual_nu_inf,
            residual_mu_inf: last.residual_mu_inf,
        });
    }
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{},{},{}", r.gamma, r.nnz, r.iterations, r.converged, r.residual_nu_inf, r.residual_mu_inf))
        .collect();
    io::write_csv(spec.out.join("sweep.csv"), GAMMA_SWEEP_HEADER, &lines)?;
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        return Err(Error::NotConverged { iterations: r.iterations });
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct MeshSweepSpec {
    pub sizes: Vec<usize>,
    pub gamma: f64,
    /// Tolerance of the continuous problem; each size uses `tolerance * N`.
    pub tolerance: f64,
    /// Number of random Lorentzian instances drawn from `seed`.
    pub instances: usize,
    pub seed: u64,
    pub settings: SolverSettings,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshSweepRow {
    pub instance: usize,
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    /// L1 distance between the plan's row marginal and the target density.
    pub marginal_l1: f64,
    pub seconds: f64,
}

pub const MESH_SWEEP_HEADER: &str = "instance,n,iterations,converged,marginal_l1";

/// Lorentzian parameters of the sweep instances.
pub fn mesh_instances(seed: u64, count: usize) -> Vec<LorentzianParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| LorentzianParams::random(&mut rng)).collect()
}

/// Solves one scaled instance; the settings' tolerance is replaced by `tolerance * n`.
pub fn mesh_solve(params: &LorentzianParams, n: usize, gamma: f64, tolerance: f64, settings: &SolverSettings) -> Result<(SolveReport, DiscreteProblem)> {
    let p = grid::lorentzian_problem(params, n, gamma)?;
    let tol = grid::map_quantity(Quantity::Tolerance, tolerance, n, gamma, Direction::ToSolver)?;
    let r = settings.clone().with_tolerance(tol).solve(&p)?;
    Ok((r, p))
}

/// Solves every instance at every size. `mesh.csv` holds iteration counts
/// and is reproducible byte for byte; wall times go to `timing.csv`.
pub fn cmd_mesh_sweep(spec: &MeshSweepSpec) -> Result<Vec<MeshSweepRow>> {
    if spec.sizes.is_empty() || spec.sizes.contains(&0) {
        return Err(Error::InvalidInput("size list must be nonempty and positive".into()));
    }
    if spec.instances == 0 {
        return Err(Error::InvalidInput("need at least one instance".into()));
    }
    if !(spec.tolerance > 0.0) || !(spec.gamma > 0.0) {
        return Err(Error::InvalidInput("gamma and tolerance must be positive".into()));
    }
    prepare_dir(&spec.out)?;
    let mut rows = Vec::new();
    for (instance, params) in mesh_instances(spec.seed, spec.instances).iter().enumerate() {
        for &n in &spec.sizes {
            let start = Instant::now();
            let (r, p) = mesh_solve(params, n, spec.gamma, spec.tolerance, &spec.settings)?;
            let seconds = start.elapsed().as_secs_f64();
            rows.push(MeshSweepRow {
                instance,
                n,
                iterations: r.iterations,
                converged: r.converged,
                marginal_l1: grid::row_marginal_l1(&r.plan.row_sums(), &p.nu().to_owned()),
                seconds,
            });
        }
    }
    let lines: Vec<String> = rows
        .iter()
        .map(|r| format!("{},{},{},{},{}", r.instance, r.n, r.iterations, r.converged, r.marginal_l1))
        .collect();
    io::write_csv(spec.out.join("mesh.csv"), MESH_SWEEP_HEADER, &lines)?;
    let timing: Vec<String> = rows.iter().map(|r| format!("{},{},{}", r.instance, r.n, r.seconds)).collect();
    io::write_csv(spec.out.join("timing.csv"), "instance,n,seconds", &timing)?;
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        return Err(Error::NotConverged { iterations: r.iterations });
    }
    Ok(rows)
}

/// Quadratically regularized problem between the sampled clouds.
pub fn empirical_problem(spec: &EmpiricalSpec, gamma: f64) -> Result<(Samples, DiscreteProblem)> {
    let samples = spec.sample()?;
    let cost = empirical::squared_distance_cost(&samples);
    let (mu, nu) = spec.marginals();
    let p = DiscreteProblem::new(cost, mu, nu, gamma)?;
    Ok((samples, p))
}

#[derive(Clone, Debug)]
pub struct EmpiricalRun {
    pub spec: EmpiricalSpec,
    pub gamma: f64,
    pub settings: SolverSettings,
    pub bins: usize,
    pub out: PathBuf,
}

fn write_samples(dir: &Path, s: &Samples) -> Result<()> {
    let mut lines = Vec::new();
    for (name, pts) in [("source", &s.source), ("target", &s.target)] {
        for (k, row) in pts.rows().into_iter().enumerate() {
            lines.push(format!("{name},{k},{},{}", row[0], row[1]));
        }
    }
    io::write_csv(dir.join("samples.csv"), "set,index,x,y", &lines)
}

fn write_histogram(path: PathBuf, values: &[f64], bins: usize) -> Result<()> {
    let lines: Vec<String> = empirical::log_histogram(values, bins)
        .into_iter()
        .map(|(lo, hi, c)| format!("{lo},{hi},{c}"))
        .collect();
    io::write_csv(path, "lower,upper,count", &lines)
}

/// Solves between the sampled clouds and writes `samples.csv`, `plan.csv`,
/// `arrows.csv`, `histogram.csv` and `summary.json`.
pub fn cmd_empirical(run: &EmpiricalRun) -> Result<SolveSummary> {
    let (samples, p) = empirical_problem(&run.spec, run.gamma)?;
    let r = run.settings.solve(&p)?;
    let dir = &run.out;
    let summary = write_solution(dir, &p, &run.settings, &r)?;
    write_samples(dir, &samples)?;
    let arrows: Vec<String> = r
        .plan
        .entries()
        .iter()
        .map(|&(i, j, v)| {
            format!("{},{},{},{},{v}", samples.source[[j, 0]], samples.source[[j, 1]], samples.target[[i, 0]], samples.target[[i, 1]])
        })
        .collect();
    io::write_csv(dir.join("arrows.csv"), "x_source,y_source,x_target,y_target,mass", &arrows)?;
    let values: Vec<f64> = r.plan.entries().iter().map(|e| e.2).collect();
    write_histogram(dir.join("histogram.csv"), &values, run.bins)?;
    if !r.converged {
        return Err(not_converged(&r));
    }
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub entries: usize,
    pub quadratic_nnz: usize,
    pub quadratic_above_1pct: usize,
    pub entropic_positive: usize,
    pub entropic_above_1pct: usize,
    pub quadratic_res_nu: f64,
    pub quadratic_res_mu: f64,
    pub entropic_res_nu: f64,
    pub entropic_res_mu: f64,
}

pub const COMPARISON_HEADER: &str =
    "entries,quadratic_nnz,quadratic_above_1pct,entropic_positive,entropic_above_1pct,quadratic_res_nu,quadratic_res_mu,entropic_res_nu,entropic_res_mu";

impl Comparison {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.entries,
            self.quadratic_nnz,
            self.quadratic_above_1pct,
            self.entropic_positive,
            self.entropic_above_1pct,
            self.quadratic_res_nu,
            self.quadratic_res_mu,
            self.entropic_res_nu,
            self.entropic_res_mu
        )
    }
}

fn above_fraction(values: impl Iterator<Item = f64> + Clone, frac: f64) -> usize {
    let max = values.clone().fold(0.0f64, f64::max);
    values.filter(|&v| v > frac * max).count()
}

/// Both regularized plans for one problem and their comparison.
pub struct ComparedPlans {
    pub quadratic: SolveReport,
    pub entropic: Array2<f64>,
    pub entropic_report: SinkhornReport,
    pub comparison: Comparison,
}

/// Solves `p` with the quadratic regularizer and with Sinkhorn.
pub fn compare_plans(p: &DiscreteProblem, settings: &SolverSettings, sinkhorn: &SinkhornConfig) -> Result<ComparedPlans> {
    let quadratic = settings.solve(p)?;
    let (entropic, entropic_report) = sinkhorn_solve(p.cost(), p.mu(), p.nu(), sinkhorn)?;
    let last = quadratic.final_record();
    let comparison = Comparison {
        entries: p.rows() * p.cols(),
        quadratic_nnz: quadratic.plan.nnz(),
        quadratic_above_1pct: above_fraction(quadratic.plan.entries().iter().map(|e| e.2), 0.01),
        entropic_positive: entropic.iter().filter(|&&v| v > 0.0).count(),
        entropic_above_1pct: above_fraction(entropic.iter().copied(), 0.01),
        quadratic_res_nu: last.residual_nu_inf,
        quadratic_res_mu: last.residual_mu_inf,
        entropic_res_nu: entropic_report.residual_nu_inf,
        entropic_res_mu: entropic_report.residual_mu_inf,
    };
    Ok(ComparedPlans { quadratic, entropic, entropic_report, comparison })
}

#[derive(Clone, Debug)]
pub struct CompareSpec {
    pub spec: EmpiricalSpec,
    pub gamma: f64,
    pub sinkhorn: SinkhornConfig,
    pub settings: SolverSettings,
    pub bins: usize,
    pub out: PathBuf,
}

/// Runs both regularizers on the same samples and writes `comparison.csv`,
/// `quadratic_plan.csv`, `entropic_plan.pgm`, `quadratic_plan.pgm` and one
/// histogram per plan.
pub fn cmd_compare_sinkhorn(spec: &CompareSpec) -> Result<Comparison> {
    let (samples, p) = empirical_problem(&spec.spec, spec.gamma)?;
    let c = compare_plans(&p, &spec.settings, &spec.sinkhorn)?;
    let dir = &spec.out;
    prepare_dir(dir)?;
    write_samples(dir, &samples)?;
    io::write_plan(dir.join("quadratic_plan.csv"), &c.quadratic.plan)?;
    io::write_pgm(dir.join("quadratic_plan.pgm"), &c.quadratic.plan.to_dense())?;
    io::write_pgm(dir.join("entropic_plan.pgm"), &c.entropic)?;
    io::write_csv(dir.join("comparison.csv"), COMPARISON_HEADER, &[c.comparison.csv_row()])?;
    let q: Vec<f64> = c.quadratic.plan.entries().iter().map(|e| e.2).collect();
    write_histogram(dir.join("histogram_quadratic.csv"), &q, spec.bins)?;
    write_histogram(dir.join("histogram_entropic.csv"), c.entropic.as_slice().unwrap_or(&[]), spec.bins)?;
    if !c.quadratic.converged {
        return Err(not_converged(&c.quadratic));
    }
    if !c.entropic_report.converged {
        return Err(Error::NotConverged { iterations: c.entropic_report.iterations });
    }
    Ok(c.comparison)
}

/// Product coupling `nu mu^T / mass`.
pub fn product_coupling(mu: &Array1<f64>, nu: &Array1<f64>) -> Array2<f64> {
    let mass = mu.sum();
    Array2::from_shape_fn((nu.len(), mu.len()), |(i, j)| nu[i] * mu[j] / mass)
}

/// Re-reads a plan file and returns its marginal residuals.
pub fn recheck_plan(path: &Path, p: &DiscreteProblem) -> Result<(f64, f64)> {
    let plan: TransportPlan = io::read_plan(path, p.rows(), p.cols())?;
    crate::problem::marginal_residuals(p, &plan)
}
