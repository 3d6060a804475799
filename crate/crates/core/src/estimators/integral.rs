//! Mean of `phi(Y)` from the local instrumental variable: the integral over
//! the propensity of `d/dp E[phi(Y) R | pi(Z) = p]`.

use serde::{Deserialize, Serialize};

use super::local_poly::{LocalPolyConfig, LocalPolySmoother};
use super::propensity::estimate_propensity;
use crate::frame::SurveyFrame;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegralConfig {
    /// Regression of `R` on `Z`.
    pub propensity: LocalPolyConfig,
    /// Local linear regression of `phi(Y) R` on the estimated propensity.
    pub regression: LocalPolyConfig,
    /// Interior grid size for the trapezoid rule.
    pub grid_points: usize,
    /// Raise `at_infinity_unreliable` when `max p < 1 - support_margin`.
    pub support_margin: f64,
    /// Bandwidth for the reported local-IV curve; the regression bandwidth
    /// when unset.
    pub derivative_bandwidth: Option<f64>,
}

impl Default for IntegralConfig {
    fn default() -> Self {
        Self {
            propensity: LocalPolyConfig::default(),
            regression: LocalPolyConfig::default(),
            grid_points: 101,
            support_margin: 0.05,
            derivative_bandwidth: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralEstimate {
    pub estimate: f64,
    pub se: f64,
    /// `m(1)`, the identification-at-infinity endpoint.
    pub endpoint: f64,
    pub endpoint_se: f64,
    pub at_infinity_unreliable: bool,
    /// Observed range of the estimated propensity.
    pub p_range: (f64, f64),
    pub bandwidth: f64,
    /// `(p, d/dp m(p))` on the interior grid.
    pub local_iv: Vec<(f64, f64)>,
    /// Evaluation points whose kernel window had to be widened.
    pub widened_points: usize,
    /// `estimate = sum_i weights[i] * phi(Y_i) R_i`, in frame order.
    #[serde(skip)]
    pub weights: Vec<f64>,
}

pub fn mean_by_integral(frame: &SurveyFrame, phi: impl Fn(f64) -> f64, config: &IntegralConfig) -> Result<IntegralEstimate> {
    let p_hat = estimate_propensity(&frame.r, &frame.z, &frame.z, &config.propensity)?;
    mean_by_integral_with_propensity(&p_hat, &frame.phi_r(phi), config)
}

/// Same estimator with a supplied propensity `p_hat[i]` for each unit.
pub fn mean_by_integral_with_propensity(p_hat: &[f64], phi_r: &[f64], config: &IntegralConfig) -> Result<IntegralEstimate> {
    if config.grid_points < 2 {
        return Err(Error::Precondition("integral.grid_points must be >= 2".into()));
    }
    let reg = LocalPolyConfig { degree: 1, ..config.regression.clone() };
    let sm = LocalPolySmoother::new(p_hat, phi_r, &reg)?;
    let h = sm.bandwidth();
    let xs = sm.sorted_x();
    let (p_lo, p_hi) = (xs[0].max(0.0), xs[xs.len() - 1].min(1.0));
    let (a, b) = ((p_lo + h).min(0.5), (p_hi - h).max(0.5));
    if !(a < b) {
        return Err(Error::InsufficientData(format!(
            "propensity support [{p_lo:.3}, {p_hi:.3}] too narrow for bandwidth {h:.3}"
        )));
    }
    let g = config.grid_points;
    let step = (b - a) / (g - 1) as f64;
    let n = xs.len();
    let mut c = vec![0.0; n];
    let mut widened = 0;
    let mut local_iv = Vec::with_capacity(g);
    let ys = sm.sorted_y();
    let mut add = |x0: f64, cv: f64, cs: f64, c: &mut [f64]| -> Result<f64> {
        let w = sm.weights_at(x0)?;
        widened += w.widened as usize;
        let mut slope = 0.0;
        for (j, (lv, ls)) in w.value.iter().zip(&w.slope).enumerate() {
            c[w.start + j] += cv * lv + cs * ls;
            slope += ls * ys[w.start + j];
        }
        Ok(slope)
    };
    let curve = match config.derivative_bandwidth {
        Some(hd) => Some(LocalPolySmoother::new(p_hat, phi_r, &LocalPolyConfig { bandwidth: Some(hd), ..reg.clone() })?),
        None => None,
    };
    for j in 0..g {
        let p = a + step * j as f64;
        let tw = if j == 0 || j == g - 1 { 0.5 * step } else { step };
        let slope = add(p, 0.0, tw, &mut c)?;
        let slope = match &curve {
            Some(sm) => sm.fit_at(p)?.slope,
            None => slope,
        };
        local_iv.push((p, slope));
    }
    add(1.0, 1.0, 0.0, &mut c)?;
    add(b, -1.0, 0.0, &mut c)?;
    add(a, 1.0, 0.0, &mut c)?;

    let estimate: f64 = c.iter().zip(ys).map(|(c, y)| c * y).sum();
    let resid = residuals(&sm)?;
    let se = c.iter().zip(&resid).map(|(c, e)| (c * e).powi(2)).sum::<f64>().sqrt();
    let top = sm.fit_at(1.0)?;
    let mut weights = vec![0.0; n];
    for (k, &i) in sm.order().iter().enumerate() {
        weights[i] = c[k];
    }
    Ok(IntegralEstimate {
        estimate,
        se,
        endpoint: top.value,
        endpoint_se: top.se_value,
        at_infinity_unreliable: p_hi < 1.0 - config.support_margin,
        p_range: (p_lo, p_hi),
        bandwidth: h,
        local_iv,
        widened_points: widened + top.widened as usize,
        weights,
    })
}

/// `y - m(x)` per sorted observation, with `m` fitted on a grid and
/// interpolated.
fn residuals(sm: &LocalPolySmoother) -> Result<Vec<f64>> {
    const G: usize = 201;
    let xs = sm.sorted_x();
    let (x0, x1) = (xs[0], xs[xs.len() - 1]);
    if x0 == x1 {
        let m = sm.fit_at(x0)?.value;
        return Ok(sm.sorted_y().iter().map(|y| y - m).collect());
    }
    let step = (x1 - x0) / (G - 1) as f64;
    let fits: Vec<f64> = (0..G).map(|j| sm.fit_at(x0 + step * j as f64).map(|f| f.value)).collect::<Result<_>>()?;
    Ok(xs
        .iter()
        .zip(sm.sorted_y())
        .map(|(&x, &y)| {
            let pos = ((x - x0) / step).clamp(0.0, (G - 1) as f64);
            let j = (pos.floor() as usize).min(G - 2);
            let t = pos - j as f64;
            y - (fits[j] * (1.0 - t) + fits[j + 1] * t)
        })
        .collect())
}
