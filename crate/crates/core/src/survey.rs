//! Survey-weighted Gini index, its variance, and multiple imputation of
//! nonrespondents from the estimated nonrespondent outcome law.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{default_t_grid, nonrespondent_cdf, CdfConfig, CdfEstimate, Method};
use crate::frame::SurveyFrame;
use crate::scalar::Scalar;
use crate::selection::{derive_seed, rng_from_seed};
use crate::stats::{norm_quantile, quantile_sorted, sorted};
use crate::{Error, Result};

fn check_inputs<T: Scalar>(y: &[T], weights: &[T]) -> Result<()> {
    if y.len() != weights.len() {
        return Err(Error::Precondition(format!(
            "{} outcomes but {} weights",
            y.len(),
            weights.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("no outcomes".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite() || *v < T::zero()) {
        return Err(Error::Domain(format!("outcome {i} is negative or not finite")));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w <= T::zero()) {
        return Err(Error::Domain(format!("weight {i} is not a positive finite number")));
    }
    Ok(())
}

/// Gini index of outcomes already sorted ascending, with nonnegative
/// multiplicity-adjusted weights. `None` when the weighted total is zero.
fn gini_sorted<T: Scalar>(y: &[T], w: &[T]) -> Option<T> {
    let total_w: T = w.iter().copied().sum();
    if total_w <= T::zero() {
        return None;
    }
    let half = T::lit(0.5);
    let (mut below, mut num, mut den) = (T::zero(), T::zero(), T::zero());
    let mut i = 0;
    while i < y.len() {
        let mut j = i;
        let (mut gw, mut gwy) = (T::zero(), T::zero());
        while j < y.len() && y[j] == y[i] {
            gw += w[j];
            gwy += w[j] * y[j];
            j += 1;
        }
        let rank = (below + half * gw) / total_w;
        num += gwy * (T::lit(2.0) * rank - T::one());
        den += gwy;
        below += gw;
        i = j;
    }
    (den > T::zero()).then(|| num / den)
}

fn sort_pairs<T: Scalar>(y: &[T], weights: &[T]) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).expect("finite outcomes"));
    (idx.iter().map(|&i| y[i]).collect(), idx.iter().map(|&i| weights[i]).collect())
}

/// Weighted Gini index with midpoint ranks
/// `r(i) = sum_j w_j (1{y_j < y_i} + 1{y_j = y_i}/2)`, `w_j = pi_j / sum pi`:
/// `sum_i pi_i (2 r(i) - 1) y_i / sum_i pi_i y_i`.
pub fn weighted_gini<T: Scalar>(y: &[T], weights: &[T]) -> Result<T> {
    check_inputs(y, weights)?;
    let (ys, ws) = sort_pairs(y, weights);
    gini_sorted(&ys, &ws).ok_or_else(|| Error::Domain("weighted outcome total is zero".into()))
}

/// Brute-force `sum_ij pi_i pi_j |y_i - y_j| / (2 sum pi sum pi y)`; O(n^2).
pub fn gini_pairwise_oracle<T: Scalar>(y: &[T], weights: &[T]) -> Result<T> {
    check_inputs(y, weights)?;
    let total_w: T = weights.iter().copied().sum();
    let total_wy: T = y.iter().zip(weights).map(|(&y, &w)| y * w).sum();
    if total_wy <= T::zero() {
        return Err(Error::Domain("weighted outcome total is zero".into()));
    }
    let mut acc = T::zero();
    for (&yi, &wi) in y.iter().zip(weights) {
        for (&yj, &wj) in y.iter().zip(weights) {
            acc += wi * wj * (yi - yj).abs();
        }
    }
    Ok(acc / (T::lit(2.0) * total_w * total_wy))
}

/// Variance estimator for the Gini index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    #[default]
    Bootstrap,
    Jackknife,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VarianceConfig {
    pub method: VarianceMethod,
    /// Bootstrap replicates (ignored by the jackknife).
    pub replicates: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        Self { method: VarianceMethod::Bootstrap, replicates: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GiniResult {
    pub estimate: f64,
    pub variance: f64,
    pub method: VarianceMethod,
}

/// With-replacement bootstrap: each replicate draws `n` records with their
/// weights; the empirical variance of the replicate Gini indices is scaled
/// by `n / (n - 1)`.
pub fn bootstrap_variance(y: &[f64], weights: &[f64], replicates: usize, seed: u64) -> Result<f64> {
    check_inputs(y, weights)?;
    if replicates < 50 {
        return Err(Error::Precondition(format!("bootstrap needs at least 50 replicates, got {replicates}")));
    }
    let n = y.len();
    if n < 2 {
        return Ok(0.0);
    }
    let (ys, ws) = sort_pairs(y, weights);
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u32; n];
    let mut bw = vec![0.0; n];
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
        for ((b, &w), &c) in bw.iter_mut().zip(&ws).zip(&counts) {
            *b = w * c as f64;
        }
        // A resample of zero outcomes only is perfectly equal.
        values.push(gini_sorted(&ys, &bw).unwrap_or(0.0));
    }
    Ok(crate::stats::variance(&values) * n as f64 / (n as f64 - 1.0))
}

/// Delete-one jackknife variance.
pub fn jackknife_variance(y: &[f64], weights: &[f64]) -> Result<f64> {
    check_inputs(y, weights)?;
    let n = y.len();
    if n < 2 {
        return Ok(0.0);
    }
    let (ys, mut ws) = sort_pairs(y, weights);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let keep = ws[i];
        ws[i] = 0.0;
        values.push(gini_sorted(&ys, &ws).unwrap_or(0.0));
        ws[i] = keep;
    }
    let m = crate::stats::mean(&values);
    Ok(values.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64)
}

/// Gini estimate with the configured variance estimator.
pub fn gini_with_variance(y: &[f64], weights: &[f64], config: &VarianceConfig, seed: u64) -> Result<GiniResult> {
    let estimate = weighted_gini(y, weights)?;
    let variance = match config.method {
        VarianceMethod::Bootstrap => bootstrap_variance(y, weights, config.replicates, seed)?,
        VarianceMethod::Jackknife => jackknife_variance(y, weights)?,
    };
    Ok(GiniResult { estimate, variance, method: config.method })
}

fn draw_around<R: Rng + ?Sized>(estimate: f64, variance: f64, rng: &mut R) -> f64 {
    if variance == 0.0 {
        return estimate;
    }
    let e: f64 = StandardNormal.sample(rng);
    estimate + variance.sqrt() * e
}

/// `estimate + sqrt(variance) * eps`, `eps ~ N(0, 1)`.
pub fn normal_draw(estimate: f64, variance: f64, seed: u64) -> Result<f64> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::Domain(format!("variance {variance} must be finite and nonnegative")));
    }
    Ok(draw_around(estimate, variance, &mut rng_from_seed(seed)))
}

fn quantile_interval(replicates: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha {alpha} must lie in [0, 1)")));
    }
    if replicates.is_empty() {
        return Err(Error::InsufficientData("no replicates".into()));
    }
    if replicates.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite replicate".into()));
    }
    let s = sorted(replicates);
    Ok((quantile_sorted(&s, alpha / 2.0), quantile_sorted(&s, 1.0 - alpha / 2.0)))
}

/// Equal-tailed empirical quantile interval at level `1 - alpha`.
pub fn confidence_interval(replicates: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if replicates.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "an empirical interval needs at least 20 replicates, got {}",
            replicates.len()
        )));
    }
    quantile_interval(replicates, alpha)
}

/// Treatment of the estimation error in the nonrespondent law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterUncertainty {
    /// One estimated law shared by every replicate.
    Ignore,
    /// Each replicate re-estimates the law on a with-replacement resample
    /// of the frame before drawing.
    #[default]
    Bootstrap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputeConfig {
    pub method: Method,
    /// Number of completed data sets `T`.
    pub replicates: usize,
    pub alpha: f64,
    pub seed: u64,
    pub grid_points: usize,
    pub variance: VarianceConfig,
    pub cdf: CdfConfig,
    pub parameter_uncertainty: ParameterUncertainty,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        Self {
            method: Method::Threshold,
            replicates: 50,
            alpha: 0.1,
            seed: 0,
            grid_points: 512,
            variance: VarianceConfig::default(),
            cdf: CdfConfig::default(),
            parameter_uncertainty: ParameterUncertainty::Bootstrap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImputationReport {
    pub method: Method,
    /// `G_t = G(Y^t) + sqrt(V(Y^t)) eps_t`, one per completed data set.
    pub replicates: Vec<f64>,
    /// Point estimates `G(Y^t)` before the normal perturbation.
    pub completed_estimates: Vec<f64>,
    pub interval: (f64, f64),
    pub level: f64,
    pub alpha: f64,
    pub seed: u64,
    pub seeds: Vec<u64>,
    /// Respondents-only estimate and its variance.
    pub naive: GiniResult,
    pub nonresponse_rate: f64,
    /// No nonrespondents: the interval is a normal approximation.
    pub degenerate: bool,
    pub at_infinity_unreliable: bool,
    pub t_range: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

impl ImputationReport {
    pub const CSV_HEADER: &'static str =
        "method,replicates,level,lower,upper,median,naive_estimate,naive_variance,nonresponse_rate,degenerate,seed";

    /// Median of the replicates.
    pub fn median(&self) -> f64 {
        quantile_sorted(&sorted(&self.replicates), 0.5)
    }

    /// One-line summary matching [`Self::CSV_HEADER`].
    pub fn csv_line(&self) -> String {
        let method = match self.method {
            Method::Threshold => "threshold",
            Method::RandomCoefficients => "random_coefficients",
            Method::Mar => "mar",
        };
        format!(
            "{method},{},{},{},{},{},{},{},{},{},{}",
            self.replicates.len(),
            self.level,
            self.interval.0,
            self.interval.1,
            self.median(),
            self.naive.estimate,
            self.naive.variance,
            self.nonresponse_rate,
            self.degenerate,
            self.seed
        )
    }

    /// Normal-approximation interval around the naive estimate.
    pub fn naive_interval(&self) -> (f64, f64) {
        let half = norm_quantile(1.0 - self.alpha / 2.0) * self.naive.variance.sqrt();
        (self.naive.estimate - half, self.naive.estimate + half)
    }
}

/// Multiple imputation of the nonrespondents' outcomes.
///
/// The nonrespondent law is estimated once on a `grid_points` t-grid; each
/// replicate `t` draws `F^{-1}(U)` for every nonrespondent, keeps observed
/// outcomes, and perturbs the completed-data Gini by its estimated standard
/// error times an independent standard normal. Replicates use seeds
/// `derive_seed(seed, t)` and run in parallel.
pub fn multiple_impute(frame: &SurveyFrame, config: &ImputeConfig) -> Result<ImputationReport> {
    frame.validate()?;
    if config.replicates == 0 {
        return Err(Error::Precondition("replicates must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&config.alpha) {
        return Err(Error::Domain(format!("alpha {} must lie in [0, 1)", config.alpha)));
    }
    let y_obs = frame.observed_y();
    let w_obs: Vec<f64> = frame.r.iter().zip(&frame.weight).filter(|(&r, _)| r == 1).map(|(_, &w)| w).collect();
    let naive = gini_with_variance(&y_obs, &w_obs, &config.variance, derive_seed(config.seed, u64::MAX))?;
    let mut warnings = Vec::new();
    let degenerate = frame.nonrespondents() == 0;
    let mut t_grid = None;
    let cdf: Option<CdfEstimate> = if degenerate {
        warnings.push("no nonrespondents: normal-approximation interval".into());
        None
    } else {
        let mut grid = default_t_grid(&y_obs, config.grid_points)?;
        if y_obs.iter().all(|&v| v >= 0.0) && grid[0] < 0.0 {
            // Nonnegative outcomes: keep imputations in the Gini's domain.
            let hi = grid[grid.len() - 1];
            let step = hi / (grid.len() - 1) as f64;
            grid = (0..grid.len()).map(|i| i as f64 * step).collect();
        }
        let est = nonrespondent_cdf(frame, &grid, config.method, &config.cdf)?;
        t_grid = Some(grid);
        Some(est)
    };
    if let Some(c) = &cdf {
        if c.at_infinity_unreliable {
            warnings.push("propensity support does not reach 1; identification at infinity is unreliable".into());
        }
    }
    let missing: Vec<usize> = (0..frame.len()).filter(|&i| frame.r[i] == 0).collect();
    let seeds: Vec<u64> = (0..config.replicates as u64).map(|t| derive_seed(config.seed, t)).collect();
    let draws: Vec<Result<(f64, f64)>> = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = rng_from_seed(s);
            let mut y: Vec<f64> = frame.y.iter().map(|v| v.unwrap_or(0.0)).collect();
            let refit = match (&t_grid, config.parameter_uncertainty) {
                (Some(grid), ParameterUncertainty::Bootstrap) => {
                    let n = frame.len();
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    Some(nonrespondent_cdf(&frame.select(&idx), grid, config.method, &config.cdf)?)
                }
                _ => None,
            };
            if let Some(c) = refit.as_ref().or(cdf.as_ref()) {
                for &i in &missing {
                    let u: f64 = rng.random();
                    y[i] = c.quantile(u);
                }
            }
            let g = gini_with_variance(&y, &frame.weight, &config.variance, rng.random())?;
            Ok((g.estimate, draw_around(g.estimate, g.variance, &mut rng)))
        })
        .collect();
    let (completed_estimates, replicates): (Vec<f64>, Vec<f64>) =
        draws.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    if replicates.len() < 20 {
        warnings.push(format!("interval from only {} replicates", replicates.len()));
    }
    let interval = quantile_interval(&replicates, config.alpha)?;
    Ok(ImputationReport {
        method: config.method,
        replicates,
        completed_estimates,
        interval,
        level: 1.0 - config.alpha,
        alpha: config.alpha,
        seed: config.seed,
        seeds,
        naive,
        nonresponse_rate: frame.nonrespondents() as f64 / frame.len() as f64,
        degenerate,
        at_infinity_unreliable: cdf.as_ref().is_some_and(|c| c.at_infinity_unreliable),
        t_range: cdf.as_ref().map(|c| (c.t[0], c.t[c.t.len() - 1])),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_examples() {
        assert_eq!(weighted_gini(&[1.0, 1.0, 1.0], &[1.0; 3]).unwrap(), 0.0);
        assert!((weighted_gini::<f64>(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((weighted_gini::<f64>(&[0.0, 1.0], &[1.0; 2]).unwrap() - 0.5).abs() < 1e-15);
        assert!(weighted_gini(&[0.0, 0.0], &[1.0; 2]).is_err());
        assert!(weighted_gini(&[-1.0, 2.0], &[1.0; 2]).is_err());
    }

    #[test]
    fn alpha_zero_is_range() {
        let r: Vec<f64> = (0..25).map(|i| i as f64).collect();
        assert_eq!(confidence_interval(&r, 0.0).unwrap(), (0.0, 24.0));
        assert!(confidence_interval(&r[..10], 0.1).is_err());
    }
}
