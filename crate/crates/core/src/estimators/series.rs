//! Truncated odd-harmonic series for the root
//! `(E[phi(Y) | Gamma = .] f_Gamma(.))^-` of the random-coefficients model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::boundary::directions;
use super::directional::{directional_density, DirectionalConfig};
use crate::frame::SurveyFrame;
use crate::sphere::{dot, hemisphere_q_integrals, Damping, OddKernel, SphericalGrid};
use crate::transform::{reconstruct_from_odd, SphericalFunction};
use crate::{Error, Grid, GridFunction, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub damping: Damping,
    pub density: DirectionalConfig,
    /// Samples with `f_S < floor_ratio * max f_S` are dropped.
    pub floor_ratio: f64,
    /// Warn when more than this share of respondents is dropped.
    pub max_drop_share: f64,
    pub centering: Centering,
}

/// Control variate subtracted from each summand; its exact integral is added
/// back, so the expectation of the coefficients is unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Plain respondent sum.
    None,
    /// Subtract `mean_estimate / 2` from every unit; this cancels the
    /// hemisphere correction term.
    #[default]
    Half,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            damping: Damping::None,
            density: DirectionalConfig::default(),
            floor_ratio: 1e-3,
            max_drop_share: 0.05,
            centering: Centering::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SeriesEstimate {
    pub gamma_grid: Arc<Grid>,
    pub truncation: usize,
    /// `coefficients[node][p]` = estimated `c_{2p+1}(gamma_node)`.
    pub coefficients: Vec<Vec<f64>>,
    /// Odd root on `gamma_grid`.
    pub root: GridFunction,
    /// `2 root 1{root > 0}`.
    pub reconstructed: GridFunction,
    pub dropped: usize,
    pub density_bandwidth: f64,
    pub warnings: Vec<String>,
}

/// Coefficients `c_{2p+1}(gamma) = 2 mean(q(gamma.S) phi(Y) R / f_S(S)) -
/// mean_estimate * int_{H+} q(gamma.s) ds` for `p = 0..=truncation`, and the
/// root `sum_p c_{2p+1} / lambda_{2p+1}`.
pub fn series_coefficients(
    frame: &SurveyFrame,
    phi: impl Fn(f64) -> f64,
    gamma_grid: Arc<Grid>,
    truncation: usize,
    mean_estimate: f64,
    config: &SeriesConfig,
) -> Result<SeriesEstimate> {
    let s = directions(&frame.z);
    let d = s.width();
    if gamma_grid.dimension() != d {
        return Err(Error::Precondition(format!(
            "gamma grid has dimension {}, data has {d}",
            gamma_grid.dimension()
        )));
    }
    if !gamma_grid.is_antipodally_closed() {
        return Err(Error::Precondition("gamma grid must be antipodally closed".into()));
    }
    if !mean_estimate.is_finite() {
        return Err(Error::Precondition("mean estimate must be finite".into()));
    }
    let n = frame.len();
    let density = directional_density(&s, &config.density)?;
    let fmax = density.density.values().iter().fold(0.0f64, |a, &b| a.max(b));
    let floor = config.floor_ratio * fmax;

    // Per unit: direction, phi(Y) R / f_S and 1 / f_S, in canonical order.
    let mut terms: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    let mut dropped = 0;
    let mut respondents = 0;
    for (i, y) in frame.y.iter().enumerate() {
        if y.is_some() {
            respondents += 1;
        }
        if y.is_none() && config.centering == Centering::None {
            continue;
        }
        let si = s.row(i);
        let f = density.at(si);
        if f < floor || f <= 0.0 {
            dropped += usize::from(y.is_some());
            continue;
        }
        let v = y.map_or(0.0, |y| phi(y) / f);
        terms.push((si.to_vec(), v, 1.0 / f));
    }
    terms.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y)))
            .then(a.1.total_cmp(&b.1))
    });
    let mut warnings = Vec::new();
    if respondents > 0 && dropped as f64 > config.max_drop_share * respondents as f64 {
        warnings.push(format!(
            "{dropped} of {respondents} respondents dropped below the density floor"
        ));
    }

    let kernel = OddKernel::<f64>::new(d, truncation, config.damping)?;
    let hemi = SphericalGrid::<f64>::build(d, config.density.resolution.max(16) * if d == 2 { 8 } else { 1 })?;
    let np = truncation + 1;
    let m = gamma_grid.len();
    let mut coefficients = vec![Vec::new(); m];
    let mut scratch = kernel.scratch();
    let mut q = vec![0.0; np];
    for i in 0..m {
        let a = gamma_grid.antipode(i).expect("closed grid");
        if a < i {
            continue;
        }
        let gamma = gamma_grid.node(i);
        let mut acc = vec![0.0; np];
        for (si, v, w) in &terms {
            let t = dot(gamma, si);
            let v = match config.centering {
                Centering::None => *v,
                Centering::Half => v - 0.5 * mean_estimate * w,
            };
            kernel.values(t, &mut scratch, &mut q);
            for (a, qp) in acc.iter_mut().zip(&q) {
                *a += v * qp;
            }
        }
        let mut c: Vec<f64> = acc.iter().map(|a| 2.0 * a / n as f64).collect();
        if config.centering == Centering::None {
            let hp = hemisphere_q_integrals(&kernel, gamma, &hemi);
            c.iter_mut().zip(&hp).for_each(|(c, h)| *c -= mean_estimate * h);
        }
        coefficients[a] = c.iter().map(|v| -v).collect();
        coefficients[i] = c;
    }
    let inv = kernel.inv_lambda();
    let root_values: Vec<f64> = coefficients.iter().map(|c| c.iter().zip(inv).map(|(c, l)| c * l).sum()).collect();
    let root = SphericalFunction::new(gamma_grid.clone(), root_values)?;
    let reconstructed = reconstruct_from_odd(&root)?;
    Ok(SeriesEstimate {
        gamma_grid,
        truncation,
        coefficients,
        root,
        reconstructed,
        dropped,
        density_bandwidth: density.bandwidth,
        warnings,
    })
}
