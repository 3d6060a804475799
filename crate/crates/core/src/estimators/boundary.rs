//! Identification at infinity for the random-coefficients model: the sum of
//! the one-sided limits of `E[phi(Y) R | S = s]` at a boundary direction
//! `s~` and its antipode.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::local_poly::Kernel;
use crate::frame::SurveyFrame;
use crate::selection::normalize_instrument;
use crate::table::Table;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Geodesic radius of each neighborhood; `None` uses `c n^{-1/(d+3)}`.
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    /// Minimum number of points required in each neighborhood.
    pub min_points: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self { bandwidth: None, kernel: Kernel::Epanechnikov, min_points: 30 }
    }
}

impl BoundaryConfig {
    pub fn resolve_bandwidth(&self, n: usize, d: usize) -> Result<f64> {
        match self.bandwidth {
            Some(h) if h > 0.0 && h < std::f64::consts::FRAC_PI_2 => Ok(h),
            Some(h) => Err(Error::Precondition(format!("boundary bandwidth must lie in (0, pi/2), got {h}"))),
            None => Ok((1.6 * (n as f64).powf(-1.0 / (d as f64 + 3.0))).min(1.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SideFit {
    pub limit: f64,
    pub se: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryEstimate {
    pub estimate: f64,
    pub se: f64,
    pub bandwidth: f64,
    /// Fits at `s~` and at `-s~`.
    pub sides: [SideFit; 2],
    /// `estimate = sum_i weights[i] * phi(Y_i) R_i`, in frame order.
    #[serde(skip)]
    pub weights: Vec<f64>,
}

/// Directions `S_i = (1, Z_i)/|(1, Z_i)|` for every unit.
pub fn directions(z: &Table) -> Table {
    let d = z.width() + 1;
    let mut s = Table::with_capacity(d, z.len());
    let mut buf = vec![0.0; d];
    for row in z.rows() {
        normalize_instrument(row, &mut buf);
        s.push_row(&buf);
    }
    s
}

pub fn mean_at_boundary(
    frame: &SurveyFrame,
    phi: impl Fn(f64) -> f64,
    s_tilde: &[f64],
    config: &BoundaryConfig,
) -> Result<BoundaryEstimate> {
    let s = directions(&frame.z);
    boundary_from_directions(&s, &frame.phi_r(phi), s_tilde, config)
}

/// Orthonormal basis of the tangent space at `p` starting with `e_1`.
fn tangent_basis(p: &[f64]) -> Vec<Vec<f64>> {
    let d = p.len();
    let mut basis = vec![{
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    }];
    if d == 3 {
        // p x e1
        basis.push(vec![0.0, p[2], -p[1]]);
    }
    basis
}

pub fn boundary_from_directions(s: &Table, phi_r: &[f64], s_tilde: &[f64], config: &BoundaryConfig) -> Result<BoundaryEstimate> {
    let d = s.width();
    crate::sphere::check_dimension(d)?;
    if s_tilde.len() != d {
        return Err(Error::Precondition(format!("s_tilde must have {d} coordinates")));
    }
    let norm = s_tilde.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 || s_tilde[0].abs() > 1e-12 {
        return Err(Error::Precondition("s_tilde must be a unit vector with first coordinate 0".into()));
    }
    if phi_r.len() != s.len() {
        return Err(Error::Precondition("outcome and direction counts differ".into()));
    }
    let h = config.resolve_bandwidth(s.len(), d)?;
    let neg: Vec<f64> = s_tilde.iter().map(|v| -v).collect();
    let mut weights = vec![0.0; s.len()];
    // Canonical unit order makes every sum independent of the input order.
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s.row(a)
            .iter()
            .zip(s.row(b))
            .fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y)))
            .then(phi_r[a].total_cmp(&phi_r[b]))
    });
    let mut sides = Vec::with_capacity(2);
    for (name, pole) in [("s_tilde", s_tilde), ("-s_tilde", neg.as_slice())] {
        sides.push(side_fit(s, phi_r, &order, pole, h, config, name, &mut weights)?);
    }
    let sides: [SideFit; 2] = [sides[0].clone(), sides[1].clone()];
    let estimate = sides[0].limit + sides[1].limit;
    let se = (sides[0].se.powi(2) + sides[1].se.powi(2)).sqrt();
    Ok(BoundaryEstimate { estimate, se, bandwidth: h, sides, weights })
}

fn side_fit(
    s: &Table,
    y: &[f64],
    order: &[usize],
    pole: &[f64],
    h: f64,
    config: &BoundaryConfig,
    name: &str,
    weights: &mut [f64],
) -> Result<SideFit> {
    let d = s.width();
    let basis = tangent_basis(pole);
    let dim = d;
    let cos_h = h.cos();
    let mut idx = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut kw = Vec::new();
    for &i in order {
        let si = s.row(i);
        let c: f64 = si.iter().zip(pole).map(|(a, b)| a * b).sum();
        if c <= cos_h {
            continue;
        }
        let rho = c.clamp(-1.0, 1.0).acos();
        let w = config.kernel.weight(rho / h);
        if w <= 0.0 {
            continue;
        }
        let scale = if rho > 1e-12 { rho / rho.sin() } else { 1.0 };
        let mut row = vec![1.0];
        for b in &basis {
            let proj: f64 = si.iter().zip(pole).zip(b).map(|((a, p), e)| (a - c * p) * e).sum();
            row.push(scale * proj / h);
        }
        idx.push(i);
        rows.push(row);
        kw.push(w);
    }
    if idx.len() < config.min_points.max(dim + 1) {
        return Err(Error::InsufficientData(format!(
            "neighborhood of {name} holds {} points, fewer than the required {}",
            idx.len(),
            config.min_points.max(dim + 1)
        )));
    }
    let mut xtx = DMatrix::<f64>::zeros(dim, dim);
    for (row, &w) in rows.iter().zip(&kw) {
        for a in 0..dim {
            for b in 0..dim {
                xtx[(a, b)] += w * row[a] * row[b];
            }
        }
    }
    let inv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("singular local design near {name}")))?;
    let e0 = inv.row(0).transpose();
    let mut limit = 0.0;
    let mut l = Vec::with_capacity(idx.len());
    for ((row, &w), &i) in rows.iter().zip(&kw).zip(&idx) {
        let li = w * DVector::from_column_slice(row).dot(&e0);
        limit += li * y[i];
        l.push(li);
    }
    let coef = &inv * rows.iter().zip(&kw).zip(&idx).fold(DVector::<f64>::zeros(dim), |acc, ((row, &w), &i)| {
        acc + DVector::from_column_slice(row) * (w * y[i])
    });
    let mut var = 0.0;
    for ((row, li), &i) in rows.iter().zip(&l).zip(&idx) {
        let fit: f64 = row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum();
        var += (li * (y[i] - fit)).powi(2);
        weights[i] += li;
    }
    Ok(SideFit { limit, se: var.sqrt(), points: idx.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_regression_gives_twice_the_constant() {
        let mut rows = Vec::new();
        for i in 0..2000 {
            let a = -1.55 + 3.1 * i as f64 / 1999.0;
            rows.push([a.cos(), a.sin()]);
        }
        let s = Table::from_rows(2, &rows);
        let y = vec![0.5; 2000];
        let est = boundary_from_directions(&s, &y, &[0.0, 1.0], &BoundaryConfig::default()).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-10);
    }

    #[test]
    fn starved_side_is_named() {
        let s = Table::from_rows(2, &[[1.0, 0.0], [0.9f64.sqrt(), 0.1f64.sqrt()]]);
        let err = boundary_from_directions(&s, &[1.0, 1.0], &[0.0, 1.0], &BoundaryConfig::default()).unwrap_err();
        assert!(err.to_string().contains("s_tilde"));
    }

    #[test]
    fn rejects_interior_pole() {
        let s = Table::from_rows(2, &[[1.0, 0.0]]);
        assert!(boundary_from_directions(&s, &[1.0], &[0.6, 0.8], &BoundaryConfig::default()).is_err());
    }
}
