//! Univariate local polynomial regression (degree 0 or 1) with
//! equivalent-kernel weights.

use serde::{Deserialize, Serialize};

use crate::stats::{quantile_sorted, sorted, variance};
use crate::{Error, Result};

/// Compactly supported smoothing kernel on `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Biweight,
}

impl Kernel {
    #[inline]
    pub fn weight(self, u: f64) -> f64 {
        let a = 1.0 - u * u;
        if a <= 0.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * a,
            Kernel::Biweight => 0.9375 * a * a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalPolyConfig {
    /// Half-width of the kernel window; `None` selects a rule of thumb.
    pub bandwidth: Option<f64>,
    pub degree: u8,
    pub kernel: Kernel,
}

impl Default for LocalPolyConfig {
    fn default() -> Self {
        Self { bandwidth: None, degree: 1, kernel: Kernel::Epanechnikov }
    }
}

impl LocalPolyConfig {
    pub fn with_bandwidth(bandwidth: f64) -> Self {
        Self { bandwidth: Some(bandwidth), ..Self::default() }
    }

    /// Rule of thumb `2.34 min(sd, IQR/1.34) n^{-1/5}` when unset.
    pub fn resolve_bandwidth(&self, xs: &[f64]) -> Result<f64> {
        match self.bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => Ok(h),
            Some(h) => Err(Error::Precondition(format!("bandwidth must be positive, got {h}"))),
            None => Ok(rule_of_thumb(xs)),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.degree > 1 {
            return Err(Error::Capability(format!("local polynomial degree {} (supported: 0, 1)", self.degree)));
        }
        Ok(())
    }
}

/// Order-independent: computed on the sorted sample.
pub fn rule_of_thumb(xs: &[f64]) -> f64 {
    let xs = sorted(xs);
    let sd = variance(&xs).sqrt();
    let spread = match iqr_sorted(&xs) / 1.34 {
        r if r > 0.0 => sd.min(r),
        _ => sd,
    };
    let spread = if spread > 0.0 { spread } else { 1.0 };
    2.34 * spread * (xs.len() as f64).powf(-0.2)
}

fn iqr_sorted(xs: &[f64]) -> f64 {
    quantile_sorted(xs, 0.75) - quantile_sorted(xs, 0.25)
}

/// Fit at one evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFit {
    pub value: f64,
    /// `NaN` for degree 0.
    pub slope: f64,
    pub se_value: f64,
    pub se_slope: f64,
    /// Window had to be widened beyond the configured bandwidth.
    pub widened: bool,
    pub bandwidth: f64,
}

/// Weights `l_i` with `value = sum l_i y_i` (and likewise for the slope),
/// indexed into the smoother's sorted sample starting at `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalentWeights {
    pub start: usize,
    pub value: Vec<f64>,
    pub slope: Vec<f64>,
    pub widened: bool,
    pub bandwidth: f64,
}

/// Sample sorted by regressor, ready for repeated local fits.
#[derive(Clone, Debug)]
pub struct LocalPolySmoother {
    xs: Vec<f64>,
    ys: Vec<f64>,
    order: Vec<usize>,
    bandwidth: f64,
    degree: u8,
    kernel: Kernel,
}

const MAX_WIDENING: usize = 12;

impl LocalPolySmoother {
    pub fn new(xs: &[f64], ys: &[f64], config: &LocalPolyConfig) -> Result<Self> {
        config.validate()?;
        if xs.len() != ys.len() {
            return Err(Error::Precondition(format!(
                "regressor and response lengths differ ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InsufficientData("local polynomial fit needs at least 2 points".into()));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in regression sample".into()));
        }
        let bandwidth = config.resolve_bandwidth(xs)?;
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
        Ok(Self {
            xs: order.iter().map(|&i| xs[i]).collect(),
            ys: order.iter().map(|&i| ys[i]).collect(),
            order,
            bandwidth,
            degree: config.degree,
            kernel: config.kernel,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Original index of the `k`-th sorted observation.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn sorted_x(&self) -> &[f64] {
        &self.xs
    }

    pub fn sorted_y(&self) -> &[f64] {
        &self.ys
    }

    fn window(&self, x0: f64, h: f64) -> (usize, usize) {
        let lo = self.xs.partition_point(|&x| x <= x0 - h);
        let hi = self.xs.partition_point(|&x| x < x0 + h);
        (lo, hi)
    }

    /// Equivalent-kernel weights at `x0`.
    pub fn weights_at(&self, x0: f64) -> Result<EquivalentWeights> {
        let mut h = self.bandwidth;
        for attempt in 0..=MAX_WIDENING {
            let (lo, hi) = self.window(x0, h);
            if let Some((value, slope)) = self.solve(x0, h, lo, hi) {
                return Ok(EquivalentWeights { start: lo, value, slope, widened: attempt > 0, bandwidth: h });
            }
            h *= 2.0;
        }
        Err(Error::InsufficientData(format!("no usable kernel window around {x0}")))
    }

    fn solve(&self, x0: f64, h: f64, lo: usize, hi: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        if hi <= lo {
            return None;
        }
        let k: Vec<f64> = self.xs[lo..hi].iter().map(|&x| self.kernel.weight((x - x0) / h)).collect();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (j, &w) in k.iter().enumerate() {
            let u = (self.xs[lo + j] - x0) / h;
            s0 += w;
            s1 += w * u;
            s2 += w * u * u;
        }
        if s0 <= 0.0 {
            return None;
        }
        if self.degree == 0 {
            return Some((k.iter().map(|w| w / s0).collect(), Vec::new()));
        }
        let det = s0 * s2 - s1 * s1;
        if !(det > 1e-10 * s0 * s0) {
            return None;
        }
        let mut value = Vec::with_capacity(k.len());
        let mut slope = Vec::with_capacity(k.len());
        for (j, &w) in k.iter().enumerate() {
            let u = (self.xs[lo + j] - x0) / h;
            value.push(w * (s2 - u * s1) / det);
            slope.push(w * (s0 * u - s1) / (det * h));
        }
        Some((value, slope))
    }

    pub fn fit_at(&self, x0: f64) -> Result<PointFit> {
        let w = self.weights_at(x0)?;
        let ys = &self.ys[w.start..w.start + w.value.len()];
        let xs = &self.xs[w.start..w.start + w.value.len()];
        let value: f64 = w.value.iter().zip(ys).map(|(l, y)| l * y).sum();
        let slope: f64 = if self.degree == 0 {
            f64::NAN
        } else {
            w.slope.iter().zip(ys).map(|(l, y)| l * y).sum()
        };
        let resid = |j: usize| {
            let fit = if self.degree == 0 { value } else { value + slope * (xs[j] - x0) };
            ys[j] - fit
        };
        let se_value = (0..ys.len()).map(|j| (w.value[j] * resid(j)).powi(2)).sum::<f64>().sqrt();
        let se_slope = if self.degree == 0 {
            f64::NAN
        } else {
            (0..ys.len()).map(|j| (w.slope[j] * resid(j)).powi(2)).sum::<f64>().sqrt()
        };
        Ok(PointFit { value, slope, se_value, se_slope, widened: w.widened, bandwidth: w.bandwidth })
    }
}

/// Fitted values and slopes at `eval_points`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalPolyFit {
    pub values: Vec<f64>,
    /// Present for degree 1.
    pub slopes: Option<Vec<f64>>,
    pub se_values: Vec<f64>,
    /// Per-point flag: the window was widened to find enough data.
    pub widened: Vec<bool>,
    pub bandwidth: f64,
}

pub fn local_poly(xs: &[f64], ys: &[f64], eval_points: &[f64], config: &LocalPolyConfig) -> Result<LocalPolyFit> {
    let sm = LocalPolySmoother::new(xs, ys, config)?;
    let fits: Vec<PointFit> = eval_points.iter().map(|&x| sm.fit_at(x)).collect::<Result<_>>()?;
    Ok(LocalPolyFit {
        values: fits.iter().map(|f| f.value).collect(),
        slopes: (config.degree == 1).then(|| fits.iter().map(|f| f.slope).collect()),
        se_values: fits.iter().map(|f| f.se_value).collect(),
        widened: fits.iter().map(|f| f.widened).collect(),
        bandwidth: sm.bandwidth(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_lines() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let fit = local_poly(&xs, &ys, &[0.3, 0.5, 0.0, 1.0], &LocalPolyConfig::with_bandwidth(0.1)).unwrap();
        for (x, (v, s)) in [0.3, 0.5, 0.0, 1.0].iter().zip(fit.values.iter().zip(fit.slopes.unwrap())) {
            assert!((v - (2.0 * x + 1.0)).abs() < 1e-12);
            assert!((s - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn empty_window_widens() {
        let xs = [0.0, 0.1, 0.2, 5.0, 5.1];
        let ys = [1.0; 5];
        let fit = local_poly(&xs, &ys, &[2.5, 0.1], &LocalPolyConfig::with_bandwidth(0.5)).unwrap();
        assert_eq!(fit.widened, vec![true, false]);
        assert!((fit.values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_zero_has_no_slopes() {
        let cfg = LocalPolyConfig { degree: 0, ..LocalPolyConfig::with_bandwidth(1.0) };
        let fit = local_poly(&[0.0, 1.0], &[1.0, 3.0], &[0.5], &cfg).unwrap();
        assert!(fit.slopes.is_none());
        assert!((fit.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = LocalPolyConfig::default();
        assert!(local_poly(&[1.0], &[1.0], &[1.0], &cfg).is_err());
        assert!(local_poly(&[1.0, 2.0], &[1.0], &[1.0], &cfg).is_err());
        let cfg2 = LocalPolyConfig { degree: 2, ..cfg };
        assert!(matches!(local_poly(&[1.0, 2.0], &[1.0, 2.0], &[1.0], &cfg2), Err(Error::Capability(_))));
    }
}
