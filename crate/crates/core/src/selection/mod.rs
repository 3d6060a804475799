//! Generative selection models with retained latent records.
//!
//! Every simulator is a deterministic function of `(spec, n, seed)`; draws
//! come from a ChaCha8 stream seeded with `seed`.

mod laws;

pub use laws::{normal_pair, MixtureGroup, MixtureSampler, ScalarLaw};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::stats::norm_cdf;
use crate::table::Table;
use crate::{Error, Result};

/// Seeded generator used by every stochastic routine.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from `(seed, index)` (SplitMix64 mix).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn default_z_laws() -> Vec<ScalarLaw> {
    vec![ScalarLaw::standard_normal()]
}

/// Bivariate-normal selection model:
/// `Y = X'beta + sigma E_Y`, `R = 1{Z'gamma - E_R > 0}`, `corr(E_Y, E_R) = rho`.
/// `X` and `Z` carry a leading intercept; `beta` and `gamma` include it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeckmanParams {
    pub beta: Vec<f64>,
    pub sigma: f64,
    pub gamma: Vec<f64>,
    pub rho: f64,
    #[serde(default)]
    pub x_laws: Vec<ScalarLaw>,
    #[serde(default = "default_z_laws")]
    pub z_laws: Vec<ScalarLaw>,
}

impl HeckmanParams {
    /// One standard-normal instrument with `gamma = (0, 1)` so that the
    /// propensity `Phi(Z)` is uniform on `(0, 1)`; outcome mean `mu`.
    pub fn standard(mu: f64, sigma: f64, rho: f64) -> Self {
        Self {
            beta: vec![mu],
            sigma,
            gamma: vec![0.0, 1.0],
            rho,
            x_laws: Vec::new(),
            z_laws: default_z_laws(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Precondition("heckman.sigma: must be > 0".into()));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::Precondition("heckman.rho: must lie in [-1, 1]".into()));
        }
        if self.beta.len() != self.x_laws.len() + 1 {
            return Err(Error::Precondition(format!(
                "heckman.beta: expected {} entries (intercept + x_laws)",
                self.x_laws.len() + 1
            )));
        }
        if self.gamma.len() != self.z_laws.len() + 1 {
            return Err(Error::Precondition(format!(
                "heckman.gamma: expected {} entries (intercept + z_laws)",
                self.z_laws.len() + 1
            )));
        }
        validate_laws(&self.x_laws, "heckman.x_laws")?;
        validate_laws(&self.z_laws, "heckman.z_laws")
    }

    fn index(&self, z: &[f64]) -> f64 {
        self.gamma[0] + self.gamma[1..].iter().zip(z).map(|(g, z)| g * z).sum::<f64>()
    }
}

fn validate_laws(laws: &[ScalarLaw], path: &str) -> Result<()> {
    laws.iter()
        .enumerate()
        .try_for_each(|(i, l)| l.validate(&format!("{path}[{i}]")))
}

/// Response propensity `pi(z)` of the scalar-threshold model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "link", rename_all = "snake_case", deny_unknown_fields)]
pub enum Propensity {
    NormalCdf { intercept: f64, slopes: Vec<f64> },
    Logistic { intercept: f64, slopes: Vec<f64> },
    Constant { p: f64 },
}

impl Propensity {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let lin = |a: f64, b: &[f64]| a + b.iter().zip(z).map(|(b, z)| b * z).sum::<f64>();
        match self {
            Propensity::NormalCdf { intercept, slopes } => norm_cdf(lin(*intercept, slopes)),
            Propensity::Logistic { intercept, slopes } => {
                1.0 / (1.0 + (-lin(*intercept, slopes)).exp())
            }
            Propensity::Constant { p } => *p,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        match self {
            Propensity::NormalCdf { slopes, .. } | Propensity::Logistic { slopes, .. }
                if slopes.len() != k =>
            {
                Err(Error::Precondition(format!(
                    "threshold.propensity.slopes: expected {k} entries"
                )))
            }
            Propensity::Constant { p } if !(0.0..=1.0).contains(p) => Err(Error::Precondition(
                "threshold.propensity.p: must lie in [0, 1]".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Outcome equation `Y = g(X'beta + sigma E)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeModel {
    Linear { beta: Vec<f64>, sigma: f64 },
    /// `Y = exp(X'beta + sigma E)`; positive outcomes (incomes).
    LogNormal { beta: Vec<f64>, sigma: f64 },
}

impl OutcomeModel {
    fn beta(&self) -> &[f64] {
        match self {
            OutcomeModel::Linear { beta, .. } | OutcomeModel::LogNormal { beta, .. } => beta,
        }
    }

    pub fn eval(&self, x: &[f64], e: f64) -> f64 {
        let lin = |b: &[f64], s: f64| b[0] + b[1..].iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + s * e;
        match self {
            OutcomeModel::Linear { beta, sigma } => lin(beta, *sigma),
            OutcomeModel::LogNormal { beta, sigma } => lin(beta, *sigma).exp(),
        }
    }
}

/// Scalar-threshold selection `R = 1{pi(Z) > H}` with `H ~ U(0,1)`.
///
/// `H = 1 - Phi(U)` where `(U, E)` is bivariate normal with correlation
/// `copula_rho`, so positive values make high outcomes more likely to respond.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdModelSpec {
    pub propensity: Propensity,
    pub copula_rho: f64,
    pub outcome: OutcomeModel,
    #[serde(default = "default_z_laws")]
    pub z_laws: Vec<ScalarLaw>,
    #[serde(default)]
    pub x_laws: Vec<ScalarLaw>,
}

impl ThresholdModelSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.copula_rho.abs() <= 1.0) {
            return Err(Error::Precondition("threshold.copula_rho: must lie in [-1, 1]".into()));
        }
        self.propensity.validate(self.z_laws.len())?;
        if self.outcome.beta().len() != self.x_laws.len() + 1 {
            return Err(Error::Precondition(format!(
                "threshold.outcome.beta: expected {} entries (intercept + x_laws)",
                self.x_laws.len() + 1
            )));
        }
        validate_laws(&self.z_laws, "threshold.z_laws")?;
        validate_laws(&self.x_laws, "threshold.x_laws")
    }
}

/// Instrument law for the random-coefficients model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentLaw {
    Independent { laws: Vec<ScalarLaw> },
    /// `S = (1, Z)/|(1, Z)|` uniform on the half-sphere `{s_1 > 0}`.
    UniformDirection,
}

/// Random-coefficients selection `R = 1{A + B'Z > 0}` with a Gaussian
/// mixture over `(A, B_1, .., B_{d-1}, Y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCoefficientSpec {
    pub groups: Vec<MixtureGroup>,
    pub z_law: InstrumentLaw,
}

impl RandomCoefficientSpec {
    /// Ambient dimension `d` of `(A, B)`.
    pub fn dimension(&self) -> usize {
        self.groups.first().map_or(0, |g| g.mean.len().saturating_sub(1))
    }

    pub fn outcome_mean(&self) -> f64 {
        self.groups.iter().map(|g| g.weight * g.mean[g.mean.len() - 1]).sum()
    }

    pub fn validate(&self) -> Result<MixtureSampler> {
        let d = self.dimension();
        crate::sphere::check_dimension(d)?;
        if let InstrumentLaw::Independent { laws } = &self.z_law {
            if laws.len() != d - 1 {
                return Err(Error::Precondition(format!(
                    "random_coefficients.z_law.laws: expected {} entries",
                    d - 1
                )));
            }
            validate_laws(laws, "random_coefficients.z_law.laws")?;
        }
        MixtureSampler::new(&self.groups, d + 1, "random_coefficients.groups")
    }
}

/// Reparametrized model `R = 1{V - Theta - Gbar'Zbar > 0}` with a Gaussian
/// mixture over `(Theta, Gbar_1, .., Gbar_k, Y)`. `V` is drawn from `v_law`
/// and multiplied by `1 + v_spread |Zbar|` so its support can track the
/// spread of `Theta + Gbar'Zbar`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamSpec {
    pub groups: Vec<MixtureGroup>,
    pub v_law: ScalarLaw,
    #[serde(default)]
    pub v_spread: f64,
    #[serde(default = "default_z_laws")]
    pub zbar_laws: Vec<ScalarLaw>,
}

impl ReparamSpec {
    pub fn validate(&self) -> Result<MixtureSampler> {
        self.v_law.validate("reparam.v_law")?;
        validate_laws(&self.zbar_laws, "reparam.zbar_laws")?;
        if !(self.v_spread >= 0.0) {
            return Err(Error::Precondition("reparam.v_spread: must be >= 0".into()));
        }
        MixtureSampler::new(&self.groups, self.zbar_laws.len() + 2, "reparam.groups")
    }
}

/// Any supported generative model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Heckman(HeckmanParams),
    Threshold(ThresholdModelSpec),
    RandomCoefficients(RandomCoefficientSpec),
    Reparam(ReparamSpec),
}

/// A named latent column.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub name: String,
    pub values: Vec<f64>,
}

/// Simulated sample: observed `(Y, R, Z, X)`, the full outcome vector
/// (including nonrespondents), and the latent record that generated `R`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    pub spec: ModelSpec,
    pub seed: u64,
    /// Outcome for every unit; only observed where `r == 1`.
    pub y: Vec<f64>,
    pub r: Vec<u8>,
    /// Instruments without intercept.
    pub z: Table,
    /// Covariates without intercept.
    pub x: Table,
    /// Normalized directions `(1, Z)/|(1, Z)|` (random-coefficients model).
    pub s: Option<Table>,
    pub latents: Vec<Latent>,
}

impl SimulatedDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn latent(&self, name: &str) -> Option<&[f64]> {
        self.latents.iter().find(|l| l.name == name).map(|l| l.values.as_slice())
    }

    fn latent_or_err(&self, name: &str) -> Result<&[f64]> {
        self.latent(name)
            .ok_or_else(|| Error::Data(format!("latent column `{name}` missing")))
    }

    /// Recomputes every response flag from the latent record alone.
    pub fn replay_indicator(&self) -> Result<Vec<u8>> {
        let n = self.len();
        let flag = |b: bool| b as u8;
        Ok(match &self.spec {
            ModelSpec::Heckman(_) => {
                let (idx, er) = (self.latent_or_err("index")?, self.latent_or_err("e_r")?);
                (0..n).map(|i| flag(idx[i] - er[i] > 0.0)).collect()
            }
            ModelSpec::Threshold(_) => {
                let (pi, h) = (self.latent_or_err("pi")?, self.latent_or_err("h")?);
                (0..n).map(|i| flag(pi[i] > h[i])).collect()
            }
            ModelSpec::RandomCoefficients(spec) => {
                let d = spec.dimension();
                let gam: Vec<&[f64]> = (1..=d)
                    .map(|j| self.latent_or_err(&format!("gamma_{j}")))
                    .collect::<Result<_>>()?;
                let s = self.s.as_ref().ok_or_else(|| Error::Data("directions missing".into()))?;
                (0..n)
                    .map(|i| flag((0..d).map(|j| gam[j][i] * s.row(i)[j]).sum::<f64>() > 0.0))
                    .collect()
            }
            ModelSpec::Reparam(spec) => {
                let k = spec.zbar_laws.len();
                let theta = self.latent_or_err("theta")?;
                let gb: Vec<&[f64]> = (1..=k)
                    .map(|j| self.latent_or_err(&format!("gammabar_{j}")))
                    .collect::<Result<_>>()?;
                (0..n)
                    .map(|i| {
                        let z = self.z.row(i);
                        let idx = z[0] - theta[i] - (0..k).map(|j| gb[j][i] * z[1 + j]).sum::<f64>();
                        flag(idx > 0.0)
                    })
                    .collect()
            }
        })
    }

    pub fn response_rate(&self) -> f64 {
        self.r.iter().map(|&r| r as f64).sum::<f64>() / self.len() as f64
    }
}

/// Simulates `n` units from any supported model.
pub fn simulate(spec: &ModelSpec, n: usize, seed: u64) -> Result<SimulatedDataset> {
    match spec {
        ModelSpec::Heckman(p) => simulate_heckman(p, n, seed),
        ModelSpec::Threshold(s) => simulate_threshold(s, n, seed),
        ModelSpec::RandomCoefficients(s) => simulate_random_coefficients(s, n, seed),
        ModelSpec::Reparam(s) => simulate_reparam(s, n, seed),
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Precondition("n must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn draw_row<R: Rng + ?Sized>(laws: &[ScalarLaw], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    out.extend(laws.iter().map(|l| l.sample(rng)));
}

pub fn simulate_heckman(params: &HeckmanParams, n: usize, seed: u64) -> Result<SimulatedDataset> {
    check_n(n)?;
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let (mut z, mut x) = (Table::with_capacity(params.z_laws.len(), n), Table::with_capacity(params.x_laws.len(), n));
    let (mut y, mut r) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut ey, mut er, mut index) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut zr, mut xr) = (Vec::new(), Vec::new());
    for _ in 0..n {
        draw_row(&params.x_laws, &mut rng, &mut xr);
        draw_row(&params.z_laws, &mut rng, &mut zr);
        let (e_r, e_y) = normal_pair(&mut rng, params.rho);
        let lin = params.beta[0] + params.beta[1..].iter().zip(&xr).map(|(b, x)| b * x).sum::<f64>();
        let idx = params.index(&zr);
        y.push(lin + params.sigma * e_y);
        r.push((idx - e_r > 0.0) as u8);
        ey.push(e_y);
        er.push(e_r);
        index.push(idx);
        z.push_row(&zr);
        x.push_row(&xr);
    }
    Ok(SimulatedDataset {
        spec: ModelSpec::Heckman(params.clone()),
        seed,
        y,
        r,
        z,
        x,
        s: None,
        latents: vec![
            Latent { name: "e_y".into(), values: ey },
            Latent { name: "e_r".into(), values: er },
            Latent { name: "index".into(), values: index },
        ],
    })
}

pub fn simulate_threshold(spec: &ThresholdModelSpec, n: usize, seed: u64) -> Result<SimulatedDataset> {
    check_n(n)?;
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let (mut z, mut x) = (Table::with_capacity(spec.z_laws.len(), n), Table::with_capacity(spec.x_laws.len(), n));
    let (mut y, mut r) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut hs, mut pis, mut es) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut zr, mut xr) = (Vec::new(), Vec::new());
    for _ in 0..n {
        draw_row(&spec.x_laws, &mut rng, &mut xr);
        draw_row(&spec.z_laws, &mut rng, &mut zr);
        let (u, e) = normal_pair(&mut rng, spec.copula_rho);
        let h = norm_cdf(-u);
        let pi = spec.propensity.eval(&zr);
        y.push(spec.outcome.eval(&xr, e));
        r.push((pi > h) as u8);
        hs.push(h);
        pis.push(pi);
        es.push(e);
        z.push_row(&zr);
        x.push_row(&xr);
    }
    Ok(SimulatedDataset {
        spec: ModelSpec::Threshold(spec.clone()),
        seed,
        y,
        r,
        z,
        x,
        s: None,
        latents: vec![
            Latent { name: "h".into(), values: hs },
            Latent { name: "pi".into(), values: pis },
            Latent { name: "e".into(), values: es },
        ],
    })
}

/// `(1, z)/|(1, z)|`.
pub fn normalize_instrument(z: &[f64], out: &mut [f64]) {
    out[0] = 1.0;
    out[1..].copy_from_slice(z);
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    out.iter_mut().for_each(|v| *v /= norm);
}

const MAX_REDRAWS: usize = 1000;

fn draw_instrument<R: Rng + ?Sized>(law: &InstrumentLaw, d: usize, rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    match law {
        InstrumentLaw::Independent { laws } => out.extend(laws.iter().map(|l| l.sample(rng))),
        InstrumentLaw::UniformDirection => loop {
            let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm == 0.0 || v[0] == 0.0 {
                continue;
            }
            if v[0] < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            out.extend(v[1..].iter().map(|a| a / v[0]));
            break;
        },
    }
}

pub fn simulate_random_coefficients(
    spec: &RandomCoefficientSpec,
    n: usize,
    seed: u64,
) -> Result<SimulatedDataset> {
    check_n(n)?;
    let sampler = spec.validate()?;
    let d = spec.dimension();
    let mut rng = rng_from_seed(seed);
    let mut z = Table::with_capacity(d - 1, n);
    let mut s = Table::with_capacity(d, n);
    let (mut y, mut r, mut group) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut coef: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d];
    let mut gamma: Vec<Vec<f64>> = vec![Vec::with_capacity(n); d];
    let mut buf = vec![0.0; d + 1];
    let (mut zr, mut sr) = (Vec::new(), vec![0.0; d]);
    for _ in 0..n {
        let mut tries = 0;
        let g = loop {
            let g = sampler.sample_into(&mut rng, &mut buf);
            if buf[..d].iter().any(|&v| v != 0.0) {
                break g;
            }
            tries += 1;
            if tries >= MAX_REDRAWS {
                return Err(Error::Precondition(
                    "random_coefficients.groups: (A, B) = 0 with positive probability".into(),
                ));
            }
        };
        draw_instrument(&spec.z_law, d, &mut rng, &mut zr);
        normalize_instrument(&zr, &mut sr);
        let index = buf[0] + buf[1..d].iter().zip(&zr).map(|(b, z)| b * z).sum::<f64>();
        let norm = buf[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..d {
            coef[j].push(buf[j]);
            gamma[j].push(buf[j] / norm);
        }
        y.push(buf[d]);
        r.push((index > 0.0) as u8);
        group.push(g as f64);
        z.push_row(&zr);
        s.push_row(&sr);
    }
    let mut latents = vec![Latent { name: "a".into(), values: coef.remove(0) }];
    latents.extend(coef.into_iter().enumerate().map(|(j, v)| Latent { name: format!("b_{}", j + 1), values: v }));
    latents.extend(gamma.into_iter().enumerate().map(|(j, v)| Latent { name: format!("gamma_{}", j + 1), values: v }));
    latents.push(Latent { name: "group".into(), values: group });
    Ok(SimulatedDataset {
        spec: ModelSpec::RandomCoefficients(spec.clone()),
        seed,
        y,
        r,
        z,
        x: empty_rows(n),
        s: Some(s),
        latents,
    })
}

fn empty_rows(n: usize) -> Table {
    let mut x = Table::new(0);
    (0..n).for_each(|_| x.push_row(&[]));
    x
}

pub fn simulate_reparam(spec: &ReparamSpec, n: usize, seed: u64) -> Result<SimulatedDataset> {
    check_n(n)?;
    let sampler = spec.validate()?;
    let k = spec.zbar_laws.len();
    let mut rng = rng_from_seed(seed);
    let mut z = Table::with_capacity(k + 1, n);
    let (mut y, mut r) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut theta = Vec::with_capacity(n);
    let mut gb: Vec<Vec<f64>> = vec![Vec::with_capacity(n); k];
    let mut buf = vec![0.0; k + 2];
    let mut zr = Vec::new();
    let mut row = vec![0.0; k + 1];
    for _ in 0..n {
        sampler.sample_into(&mut rng, &mut buf);
        draw_row(&spec.zbar_laws, &mut rng, &mut zr);
        let zn = zr.iter().map(|a| a * a).sum::<f64>().sqrt();
        let v = spec.v_law.sample(&mut rng) * (1.0 + spec.v_spread * zn);
        let idx = v - buf[0] - (0..k).map(|j| buf[1 + j] * zr[j]).sum::<f64>();
        row[0] = v;
        row[1..].copy_from_slice(&zr);
        theta.push(buf[0]);
        for j in 0..k {
            gb[j].push(buf[1 + j]);
        }
        y.push(buf[k + 1]);
        r.push((idx > 0.0) as u8);
        z.push_row(&row);
    }
    let mut latents = vec![Latent { name: "theta".into(), values: theta }];
    latents.extend(gb.into_iter().enumerate().map(|(j, v)| Latent { name: format!("gammabar_{}", j + 1), values: v }));
    Ok(SimulatedDataset {
        spec: ModelSpec::Reparam(spec.clone()),
        seed,
        y,
        r,
        z,
        x: empty_rows(n),
        s: None,
        latents,
    })
}

/// Shares of response types under an exogenous instrument shift `z -> z'`
/// with latents held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponseTypes {
    pub always_takers: f64,
    pub never_takers: f64,
    pub compliers: f64,
    pub defiers: f64,
}

impl ResponseTypes {
    pub fn total(&self) -> f64 {
        self.always_takers + self.compliers + self.defiers + self.never_takers
    }
}

/// Monte Carlo response-type shares. `z` and `z_prime` are instrument values
/// without intercept (for the reparametrized model: `(v, zbar..)`).
pub fn classify_response_types(
    spec: &ModelSpec,
    z: &[f64],
    z_prime: &[f64],
    n: usize,
    seed: u64,
) -> Result<ResponseTypes> {
    check_n(n)?;
    if z.len() != z_prime.len() {
        return Err(Error::Precondition("z and z_prime differ in length".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = [0usize; 4];
    let mut tally = |a: bool, b: bool| {
        let slot = match (a, b) {
            (true, true) => 0,
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
        };
        counts[slot] += 1;
    };
    let expect = |k: usize, name: &str| {
        if z.len() == k {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{name}: instrument must have {k} entries")))
        }
    };
    match spec {
        ModelSpec::Heckman(p) => {
            p.validate()?;
            expect(p.z_laws.len(), "heckman")?;
            let (iz, iz2) = (p.index(z), p.index(z_prime));
            for _ in 0..n {
                let (e_r, _) = normal_pair(&mut rng, p.rho);
                tally(iz - e_r > 0.0, iz2 - e_r > 0.0);
            }
        }
        ModelSpec::Threshold(s) => {
            s.validate()?;
            expect(s.z_laws.len(), "threshold")?;
            let (pz, pz2) = (s.propensity.eval(z), s.propensity.eval(z_prime));
            for _ in 0..n {
                let (u, _) = normal_pair(&mut rng, s.copula_rho);
                let h = norm_cdf(-u);
                tally(pz > h, pz2 > h);
            }
        }
        ModelSpec::RandomCoefficients(s) => {
            let sampler = s.validate()?;
            let d = s.dimension();
            expect(d - 1, "random_coefficients")?;
            let mut buf = vec![0.0; d + 1];
            let idx = |b: &[f64], z: &[f64]| b[0] + b[1..d].iter().zip(z).map(|(b, z)| b * z).sum::<f64>();
            for _ in 0..n {
                sampler.sample_into(&mut rng, &mut buf);
                tally(idx(&buf, z) > 0.0, idx(&buf, z_prime) > 0.0);
            }
        }
        ModelSpec::Reparam(s) => {
            let sampler = s.validate()?;
            let k = s.zbar_laws.len();
            expect(k + 1, "reparam")?;
            let mut buf = vec![0.0; k + 2];
            let idx = |b: &[f64], z: &[f64]| z[0] - b[0] - (0..k).map(|j| b[1 + j] * z[1 + j]).sum::<f64>();
            for _ in 0..n {
                sampler.sample_into(&mut rng, &mut buf);
                tally(idx(&buf, z) > 0.0, idx(&buf, z_prime) > 0.0);
            }
        }
    }
    let nf = n as f64;
    let always_takers = counts[0] as f64 / nf;
    let compliers = counts[2] as f64 / nf;
    let defiers = counts[3] as f64 / nf;
    let never_takers = 1.0 - (always_takers + compliers + defiers);
    Ok(ResponseTypes { always_takers, never_takers, compliers, defiers })
}
