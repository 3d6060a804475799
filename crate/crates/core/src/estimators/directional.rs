//! von Mises–Fisher kernel density estimate for directions on the observed
//! half-sphere `{s_1 > 0}`, with reflection across `s_1 = 0`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sphere::{check_dimension, dot, SphericalGrid};
use crate::table::Table;
use crate::transform::SphericalFunction;
use crate::{Error, Grid, GridFunction, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionalConfig {
    /// Angular bandwidth `h`; concentration is `1 / h^2`. `None` uses
    /// `n^{-1/(d+3)}`.
    pub bandwidth: Option<f64>,
    /// Evaluation grid resolution (see [`SphericalGrid::build`]); a multiple
    /// of 4 keeps `{s_1 >= 0}` a union of cells for `d = 2`.
    pub resolution: usize,
    /// Reflect kernels across `s_1 = 0` (boundary correction).
    pub reflect: bool,
}

impl Default for DirectionalConfig {
    fn default() -> Self {
        Self { bandwidth: None, resolution: 64, reflect: true }
    }
}

impl DirectionalConfig {
    fn grid_resolution(&self, d: usize) -> usize {
        if d == 2 {
            (self.resolution * 8).div_ceil(4) * 4
        } else {
            self.resolution
        }
    }
}

#[derive(Clone, Debug)]
pub struct DirectionalDensity {
    pub density: GridFunction,
    pub bandwidth: f64,
}

impl DirectionalDensity {
    /// Interpolated density at a unit vector (zero off the half-sphere).
    pub fn at(&self, x: &[f64]) -> f64 {
        if x[0] < 0.0 {
            return 0.0;
        }
        self.density.grid().interpolate(self.density.values(), x).max(0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.density.grid()
    }
}

pub fn directional_density(samples: &Table, config: &DirectionalConfig) -> Result<DirectionalDensity> {
    let d = samples.width();
    check_dimension(d)?;
    if samples.is_empty() {
        return Err(Error::InsufficientData("no directions to smooth".into()));
    }
    for (i, s) in samples.rows().enumerate() {
        if (dot(s, s).sqrt() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("sample {} is not a unit vector", i + 1)));
        }
        if s[0] < 0.0 {
            return Err(Error::Precondition(format!("sample {} lies outside {{s_1 >= 0}}", i + 1)));
        }
    }
    let n = samples.len();
    let h = match config.bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::Precondition(format!("bandwidth must be positive, got {h}"))),
        None => (n as f64).powf(-1.0 / (d as f64 + 3.0)),
    };
    let kappa = 1.0 / (h * h);
    let grid = Arc::new(SphericalGrid::<f64>::build(d, config.grid_resolution(d))?);
    let bins = SphericalGrid::<f64>::build(d, 2 * config.grid_resolution(d))?;

    // First-moment binning: count and mean direction per fine cell.
    let mut sums = vec![0.0; bins.len() * d];
    let mut counts = vec![0usize; bins.len()];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        samples.row(a).iter().zip(samples.row(b)).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y)))
    });
    for &i in &order {
        let s = samples.row(i);
        let c = bins.nearest(s);
        counts[c] += 1;
        for j in 0..d {
            sums[c * d + j] += s[j];
        }
    }
    let mut centers = Vec::new();
    for c in 0..bins.len() {
        if counts[c] == 0 {
            continue;
        }
        let m = &sums[c * d..(c + 1) * d];
        let norm = dot(m, m).sqrt();
        let mut v: Vec<f64> = m.iter().map(|x| x / norm).collect();
        v.push(counts[c] as f64);
        centers.push(v);
    }
    let values: Vec<f64> = grid
        .nodes()
        .map(|x| {
            if x[0] < 0.0 {
                return 0.0;
            }
            centers
                .iter()
                .map(|c| {
                    let t = dot(x, &c[..d]);
                    let mut k = (kappa * (t - 1.0)).exp();
                    if config.reflect {
                        let tr = t - 2.0 * x[0] * c[0];
                        k += (kappa * (tr - 1.0)).exp();
                    }
                    c[d] * k
                })
                .sum()
        })
        .collect();
    let total = grid.integrate(&values);
    if !(total > 0.0) {
        return Err(Error::Numerical("density estimate vanishes on the grid".into()));
    }
    let density = SphericalFunction::new(grid, values.into_iter().map(|v| v / total).collect())?;
    Ok(DirectionalDensity { density, bandwidth: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_mode_and_normalization() {
        let s0 = [0.6, 0.0, 0.8];
        let samples = Table::from_rows(3, &[s0; 20]);
        let cfg = DirectionalConfig { bandwidth: Some(0.2), resolution: 24, reflect: true };
        let est = directional_density(&samples, &cfg).unwrap();
        assert!((est.density.integral() - 1.0).abs() < 1e-12);
        let vals = est.density.values();
        let imax = (0..vals.len()).max_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
        let g = est.grid().node(imax);
        assert!(dot(g, &s0) > (0.1f64).cos());
    }

    #[test]
    fn rejects_non_unit() {
        let samples = Table::from_rows(2, &[[1.0, 1.0]]);
        assert!(directional_density(&samples, &DirectionalConfig::default()).is_err());
    }
}
