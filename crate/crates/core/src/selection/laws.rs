//! Elementary sampling laws shared by the simulators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A univariate law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarLaw {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Constant { value: f64 },
}

impl ScalarLaw {
    pub fn standard_normal() -> Self {
        ScalarLaw::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        let ok = match *self {
            ScalarLaw::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && sd >= 0.0,
            ScalarLaw::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ScalarLaw::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{path}: invalid law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ScalarLaw::Normal { mean, sd } => {
                let e: f64 = StandardNormal.sample(rng);
                mean + sd * e
            }
            ScalarLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ScalarLaw::Constant { value } => value,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ScalarLaw::Normal { mean, .. } => mean,
            ScalarLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            ScalarLaw::Constant { value } => value,
        }
    }
}

/// One Gaussian component of a mixture over a latent vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureGroup {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Covariance, row-major; may be singular (degenerate coordinates).
    pub cov: Vec<Vec<f64>>,
}

impl MixtureGroup {
    pub fn new(weight: f64, mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Self {
        Self { weight, mean, cov }
    }

    /// Independent coordinates with the given standard deviations.
    pub fn diagonal(weight: f64, mean: Vec<f64>, sd: &[f64]) -> Self {
        let dim = mean.len();
        let cov = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { sd[i] * sd[i] } else { 0.0 }).collect())
            .collect();
        Self { weight, mean, cov }
    }
}

/// Sampler for a finite Gaussian mixture; accepts positive semidefinite
/// covariances through a symmetric square root.
#[derive(Clone, Debug)]
pub struct MixtureSampler {
    dim: usize,
    cumulative: Vec<f64>,
    means: Vec<Vec<f64>>,
    roots: Vec<DMatrix<f64>>,
}

impl MixtureSampler {
    pub fn new(groups: &[MixtureGroup], dim: usize, path: &str) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Precondition(format!("{path}: at least one group required")));
        }
        let total: f64 = groups.iter().map(|g| g.weight).sum();
        if groups.iter().any(|g| !(g.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Precondition(format!(
                "{path}: mixture weights must be positive and sum to 1 (sum = {total})"
            )));
        }
        let mut cumulative = Vec::with_capacity(groups.len());
        let mut means = Vec::with_capacity(groups.len());
        let mut roots = Vec::with_capacity(groups.len());
        let mut acc = 0.0;
        for (gi, g) in groups.iter().enumerate() {
            let gpath = format!("{path}[{gi}]");
            if g.mean.len() != dim || g.cov.len() != dim || g.cov.iter().any(|r| r.len() != dim) {
                return Err(Error::Precondition(format!(
                    "{gpath}: expected mean of length {dim} and a {dim}x{dim} covariance"
                )));
            }
            let cov = DMatrix::from_fn(dim, dim, |i, j| g.cov[i][j]);
            if (0..dim).any(|i| (0..dim).any(|j| (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12)) {
                return Err(Error::Precondition(format!("{gpath}.cov: not symmetric")));
            }
            let eig = SymmetricEigen::new(cov);
            let scale = eig.eigenvalues.amax().max(1.0);
            if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale) {
                return Err(Error::Precondition(format!("{gpath}.cov: not positive semidefinite")));
            }
            let sqrt_l = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
            roots.push(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l));
            means.push(g.mean.clone());
            acc += g.weight;
            cumulative.push(acc / total);
        }
        Ok(Self { dim, cumulative, means, roots })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one draw into `out`; returns the group index.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> usize {
        let u: f64 = rng.random();
        let g = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1);
        let e: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
        let root = &self.roots[g];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.means[g][i] + (0..self.dim).map(|j| root[(i, j)] * e[j]).sum::<f64>();
        }
        g
    }
}

/// Correlated standard normal pair with correlation `rho`.
pub fn normal_pair<R: Rng + ?Sized>(rng: &mut R, rho: f64) -> (f64, f64) {
    let a: f64 = StandardNormal.sample(rng);
    let b: f64 = StandardNormal.sample(rng);
    (a, rho * a + (1.0 - rho * rho).max(0.0).sqrt() * b)
}
