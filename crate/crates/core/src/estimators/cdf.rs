//! Law of the outcome among nonrespondents:
//! `F(t | R = 0) = (E[1{Y <= t}] - E[1{Y <= t} R]) / P(R = 0)`.

use serde::{Deserialize, Serialize};

use super::boundary::{mean_at_boundary, BoundaryConfig};
use super::integral::{mean_by_integral, IntegralConfig};
use crate::frame::SurveyFrame;
use crate::stats::{iqr, sorted};
use crate::{Error, Result};

/// How `E[phi(Y)]` is identified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Scalar-threshold selection: integral of the local instrumental variable.
    Threshold,
    /// Random-coefficients selection: limits at the boundary of the half-sphere.
    RandomCoefficients,
    /// Missing at random: nonrespondents share the respondents' law.
    Mar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CdfConfig {
    pub integral: IntegralConfig,
    pub boundary: BoundaryConfig,
    /// Boundary direction for [`Method::RandomCoefficients`]; default `e_2`.
    pub s_tilde: Option<Vec<f64>>,
}

impl Default for CdfConfig {
    fn default() -> Self {
        Self { integral: IntegralConfig::default(), boundary: BoundaryConfig::default(), s_tilde: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdfEstimate {
    pub method: Method,
    pub t: Vec<f64>,
    /// Monotone CDF in `[0, 1]`.
    pub cdf: Vec<f64>,
    /// Plug-in values before the isotonic projection.
    pub raw: Vec<f64>,
    /// Sample share of nonrespondents.
    pub nonresponse_rate: f64,
    /// Estimated `E[1] - mean(R)`, the denominator actually used.
    pub normalizer: f64,
    pub at_infinity_unreliable: bool,
}

impl CdfEstimate {
    /// Numerical inverse: linear interpolation of the monotone CDF;
    /// values of `u` outside the attained range map to the grid ends.
    pub fn quantile(&self, u: f64) -> f64 {
        let (t, f) = (&self.t, &self.cdf);
        let k = f.partition_point(|&v| v < u);
        if k == 0 {
            return t[0];
        }
        if k >= f.len() {
            return t[t.len() - 1];
        }
        let (f0, f1) = (f[k - 1], f[k]);
        if f1 <= f0 {
            return t[k];
        }
        t[k - 1] + (u - f0) / (f1 - f0) * (t[k] - t[k - 1])
    }
}

/// `points` equally spaced values over `[min - 3 IQR, max + 3 IQR]`.
pub fn default_t_grid(y_obs: &[f64], points: usize) -> Result<Vec<f64>> {
    if y_obs.is_empty() {
        return Err(Error::InsufficientData("no observed outcomes".into()));
    }
    if points < 2 {
        return Err(Error::Precondition("t-grid needs at least 2 points".into()));
    }
    let s = sorted(y_obs);
    let spread = iqr(y_obs);
    let (lo, hi) = (s[0] - 3.0 * spread, s[s.len() - 1] + 3.0 * spread);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    Ok((0..points).map(|j| lo + (hi - lo) * j as f64 / (points - 1) as f64).collect())
}

/// Pool-adjacent-violators projection onto nondecreasing sequences.
pub fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("non-empty");
            *last = ((m1 * n1 as f64 + m2 * n2 as f64) / (n1 + n2) as f64, n1 + n2);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

pub fn nonrespondent_cdf(frame: &SurveyFrame, t_grid: &[f64], method: Method, config: &CdfConfig) -> Result<CdfEstimate> {
    let n = frame.len();
    if n == 0 || t_grid.is_empty() {
        return Err(Error::InsufficientData("empty frame or t-grid".into()));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Precondition("t-grid must be strictly increasing".into()));
    }
    let nonresponse_rate = frame.nonrespondents() as f64 / n as f64;
    if nonresponse_rate < 0.01 {
        return Err(Error::InsufficientData(format!(
            "no nonrespondents to impute (nonresponse rate {nonresponse_rate:.4} < 0.01)"
        )));
    }
    if frame.respondents() == 0 {
        return Err(Error::InsufficientData("no respondents".into()));
    }
    // Respondents sorted by outcome, with the weight of the mean functional.
    let (weights, unreliable): (Vec<f64>, bool) = match method {
        Method::Threshold => {
            let est = mean_by_integral(frame, |_| 1.0, &config.integral)?;
            (est.weights, est.at_infinity_unreliable)
        }
        Method::RandomCoefficients => {
            let d = frame.z.width() + 1;
            let s_tilde = config.s_tilde.clone().unwrap_or_else(|| {
                let mut e = vec![0.0; d];
                e[1] = 1.0;
                e
            });
            (mean_at_boundary(frame, |_| 1.0, &s_tilde, &config.boundary)?.weights, false)
        }
        Method::Mar => {
            let m = frame.respondents() as f64;
            let share = m / n as f64;
            (frame.r.iter().map(|&r| if r == 1 { 1.0 / (n as f64 * share) } else { 0.0 }).collect(), false)
        }
    };
    let mut resp: Vec<(f64, f64)> = frame
        .y
        .iter()
        .zip(&weights)
        .filter_map(|(y, &w)| y.map(|y| (y, w)))
        .collect();
    resp.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let response_rate = 1.0 - nonresponse_rate;
    let e_one: f64 = resp.iter().map(|r| r.1).sum();
    let normalizer = e_one - response_rate;
    if !(normalizer > 0.0) {
        return Err(Error::Numerical(format!(
            "estimated nonrespondent mass {normalizer:.4} is not positive"
        )));
    }
    let mut raw = Vec::with_capacity(t_grid.len());
    let (mut k, mut cw, mut cnt) = (0usize, 0.0f64, 0usize);
    for &t in t_grid {
        while k < resp.len() && resp[k].0 <= t {
            cw += resp[k].1;
            cnt += 1;
            k += 1;
        }
        raw.push((cw - cnt as f64 / n as f64) / normalizer);
    }
    let cdf = isotonic(&raw).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(CdfEstimate {
        method,
        t: t_grid.to_vec(),
        cdf,
        raw,
        nonresponse_rate,
        normalizer,
        at_infinity_unreliable: unreliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic(&[]), Vec::<f64>::new());
    }

    #[test]
    fn quantile_inverts_linear_cdf() {
        let est = CdfEstimate {
            method: Method::Mar,
            t: vec![0.0, 1.0, 2.0],
            cdf: vec![0.0, 0.5, 1.0],
            raw: vec![],
            nonresponse_rate: 0.5,
            normalizer: 0.5,
            at_infinity_unreliable: false,
        };
        assert!((est.quantile(0.25) - 0.5).abs() < 1e-15);
        assert!((est.quantile(0.75) - 1.5).abs() < 1e-15);
        assert_eq!(est.quantile(0.0), 0.0);
        assert_eq!(est.quantile(1.0), 2.0);
    }
}
