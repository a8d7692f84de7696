//! Point clouds in the plane: an anisotropic Gaussian source and a uniform
//! sample from a segment of an annulus as target.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// How the unit masses of the two clouds are balanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalScaling {
    /// Every source point carries `1/N`, every target point `1/M`.
    Probability,
    /// Every target point carries `1`, every source point `M/N`.
    Count,
}

impl std::str::FromStr for MarginalScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "probability" => Ok(Self::Probability),
            "count" => Ok(Self::Count),
            other => Err(Error::Parse(format!("unknown marginal scaling '{other}' (expected probability or count)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSpec {
    pub n_source: usize,
    pub n_target: usize,
    /// Symmetric positive definite, row-major `[[a, b], [b, c]]`.
    pub covariance: [[f64; 2]; 2],
    pub radius_inner: f64,
    pub radius_outer: f64,
    /// Angular segment in degrees.
    pub angle_start: f64,
    pub angle_end: f64,
    pub scaling: MarginalScaling,
    pub seed: u64,
}

/// `diag(0.04, 0.01)` rotated by 30 degrees.
pub fn default_covariance() -> [[f64; 2]; 2] {
    let (s, c) = (PI / 6.0).sin_cos();
    let (l1, l2) = (0.04, 0.01);
    let a = c * c * l1 + s * s * l2;
    let b = c * s * (l1 - l2);
    let d = s * s * l1 + c * c * l2;
    [[a, b], [b, d]]
}

impl Default for EmpiricalSpec {
    fn default() -> Self {
        Self {
            n_source: 80,
            n_target: 120,
            covariance: default_covariance(),
            radius_inner: 0.8,
            radius_outer: 1.2,
            angle_start: 0.0,
            angle_end: 120.0,
            scaling: MarginalScaling::Probability,
            seed: 0,
        }
    }
}

/// Source points (`N x 2`) and target points (`M x 2`).
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub source: Array2<f64>,
    pub target: Array2<f64>,
}

impl EmpiricalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_source == 0 || self.n_target == 0 {
            return Err(Error::InvalidInput("sample counts must be positive".into()));
        }
        if !(0.0 < self.radius_inner && self.radius_inner < self.radius_outer && self.radius_outer.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "annulus radii must satisfy 0 < inner < outer, got {} and {}",
                self.radius_inner, self.radius_outer
            )));
        }
        if !(self.angle_start.is_finite() && self.angle_end.is_finite() && self.angle_start < self.angle_end) {
            return Err(Error::InvalidInput("angular segment must be a nonempty finite interval".into()));
        }
        self.cholesky().map(|_| ())
    }

    fn cholesky(&self) -> Result<[f64; 3]> {
        let [[a, b], [b2, d]] = self.covariance;
        if !(a.is_finite() && b.is_finite() && d.is_finite()) || b != b2 {
            return Err(Error::InvalidInput("covariance must be finite and symmetric".into()));
        }
        if !(a > 0.0) || !(a * d - b * b > 0.0) {
            return Err(Error::InvalidInput("covariance must be positive definite".into()));
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        Ok([l11, l21, (d - l21 * l21).sqrt()])
    }

    /// Draws both clouds from the seeded generator.
    pub fn sample(&self) -> Result<Samples> {
        self.validate()?;
        let [l11, l21, l22] = self.cholesky()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut source = Array2::zeros((self.n_source, 2));
        for mut row in source.rows_mut() {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            row[0] = l11 * z1;
            row[1] = l21 * z1 + l22 * z2;
        }
        let (r0, r1) = (self.radius_inner * self.radius_inner, self.radius_outer * self.radius_outer);
        let (t0, t1) = (self.angle_start.to_radians(), self.angle_end.to_radians());
        let mut target = Array2::zeros((self.n_target, 2));
        for mut row in target.rows_mut() {
            let r = (r0 + (r1 - r0) * rng.random::<f64>()).sqrt();
            let t = t0 + (t1 - t0) * rng.random::<f64>();
            row[0] = r * t.cos();
            row[1] = r * t.sin();
        }
        Ok(Samples { source, target })
    }

    /// `(mu, nu)` with `mu` over the sources and `nu` over the targets.
    pub fn marginals(&self) -> (Array1<f64>, Array1<f64>) {
        let (n, m) = (self.n_source as f64, self.n_target as f64);
        match self.scaling {
            MarginalScaling::Probability => (Array1::from_elem(self.n_source, 1.0 / n), Array1::from_elem(self.n_target, 1.0 / m)),
            MarginalScaling::Count => (Array1::from_elem(self.n_source, m / n), Array1::ones(self.n_target)),
        }
    }
}

/// `c_ij = |target_i - source_j|^2`, targets on rows.
pub fn squared_distance_cost(s: &Samples) -> Array2<f64> {
    let (m, n) = (s.target.nrows(), s.source.nrows());
    Array2::from_shape_fn((m, n), |(i, j)| {
        let dx = s.target[[i, 0]] - s.source[[j, 0]];
        let dy = s.target[[i, 1]] - s.source[[j, 1]];
        dx * dx + dy * dy
    })
}

/// Counts of the positive values in `bins` logarithmically spaced bins
/// between the smallest positive value and the largest. Returns
/// `(lower edge, upper edge, count)` per bin.
pub fn log_histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let pos: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = pos.iter().copied().fold(f64::INFINITY, f64::min).log10();
    let hi = pos.iter().copied().fold(0.0, f64::max).log10();
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in pos {
        let k = (((v.log10() - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (10f64.powf(lo + k as f64 * width), 10f64.powf(lo + (k + 1) as f64 * width), c))
        .collect()
}
