//! Hemispherical transform on grid functions: forward map, odd/even split,
//! nonnegative reconstruction and the truncated odd-harmonic inverse series.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sphere::{Damping, OddKernel, SphericalGrid};

/// Tolerance used by the oddness precondition of [`reconstruct_from_odd`].
pub const ODD_TOLERANCE: f64 = 1e-6;

/// Scalar function on `S^{d-1}` sampled at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct SphericalFunction<T> {
    grid: Arc<SphericalGrid<T>>,
    values: Vec<T>,
    /// Set when an antipodal evaluation had to interpolate because the grid
    /// is not antipodally closed.
    pub interpolated: bool,
}

impl<T: Scalar> SphericalFunction<T> {
    pub fn new(grid: Arc<SphericalGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            grid,
            values,
            interpolated: false,
        })
    }

    pub fn from_fn(grid: Arc<SphericalGrid<T>>, f: impl Fn(&[T]) -> T) -> Self {
        let values = grid.nodes().map(f).collect();
        Self {
            grid,
            values,
            interpolated: false,
        }
    }

    /// Constant density `1 / |S^{d-1}|`.
    pub fn uniform_density(grid: Arc<SphericalGrid<T>>) -> Self {
        let c = T::one() / crate::sphere::sphere_area::<T>(grid.dimension() - 1);
        Self::from_fn(grid, |_| c)
    }

    pub fn grid(&self) -> &Arc<SphericalGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn integral(&self) -> T {
        self.grid.integrate(&self.values)
    }

    /// Nonnegative with unit integral within `1e-6`.
    pub fn is_density(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero())
            && (self.integral() - T::one()).abs() <= T::lit(1e-6)
    }

    /// `f(-theta)` at node `i`.
    fn antipodal_value(&self, i: usize) -> T {
        match self.grid.antipode(i) {
            Some(j) => self.values[j],
            None => {
                let x: Vec<T> = self.grid.node(i).iter().map(|&v| -v).collect();
                self.grid.interpolate(&self.values, &x)
            }
        }
    }

    /// Largest `|f(theta) + f(-theta)|` over nodes.
    pub fn oddness_defect(&self) -> T {
        (0..self.values.len())
            .map(|i| (self.values[i] + self.antipodal_value(i)).abs())
            .fold(T::zero(), T::max)
    }

    /// `f(theta) = f(-theta)` check, same as [`Self::oddness_defect`] for `f - f-check`.
    pub fn evenness_defect(&self) -> T {
        (0..self.values.len())
            .map(|i| (self.values[i] - self.antipodal_value(i)).abs())
            .fold(T::zero(), T::max)
    }

    /// `sqrt(int (f - h)^2 d sigma)` on the shared grid.
    pub fn l2_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((&a, &b), &w)| w * (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> T {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(&a, &w)| w * a * a)
            .sum::<T>()
            .sqrt()
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            interpolated: self.interpolated,
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: T, other: &Self, beta: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| alpha * a + beta * b)
                .collect(),
            interpolated: self.interpolated || other.interpolated,
        }
    }

    /// Plot-ready CSV: node coordinates, quadrature weight, value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.grid.dimension();
        let mut header: Vec<String> = (1..=d).map(|k| format!("s_{k}")).collect();
        header.push("weight".into());
        header.push("value".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.grid.len() {
            let mut rec: Vec<String> = self.grid.node(i).iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{:e}", self.grid.weight(i)));
            rec.push(format!("{:e}", self.values[i]));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

/// `H[f](s) = int_{<s, theta> >= 0} f(theta) d sigma(theta)` at every node.
pub fn forward<T: Scalar>(f: &SphericalFunction<T>) -> SphericalFunction<T> {
    let grid = f.grid.clone();
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let pole = grid.node(i);
            (0..grid.len())
                .map(|j| {
                    let frac = grid.cap_fraction(j, pole);
                    if frac == T::zero() {
                        T::zero()
                    } else {
                        frac * grid.weight(j) * f.values[j]
                    }
                })
                .sum()
        })
        .collect();
    SphericalFunction {
        grid,
        values,
        interpolated: false,
    }
}

/// `f^-(theta) = (f(theta) - f(-theta)) / 2`.
pub fn odd_part<T: Scalar>(f: &SphericalFunction<T>) -> SphericalFunction<T> {
    let half = T::lit(0.5);
    let values = (0..f.values.len())
        .map(|i| half * (f.values[i] - f.antipodal_value(i)))
        .collect();
    SphericalFunction {
        grid: f.grid.clone(),
        values,
        interpolated: f.interpolated || !f.grid.is_antipodally_closed(),
    }
}

/// `(f + f-check) / 2`.
pub fn even_part<T: Scalar>(f: &SphericalFunction<T>) -> SphericalFunction<T> {
    let half = T::lit(0.5);
    let values = (0..f.values.len())
        .map(|i| half * (f.values[i] + f.antipodal_value(i)))
        .collect();
    SphericalFunction {
        grid: f.grid.clone(),
        values,
        interpolated: f.interpolated || !f.grid.is_antipodally_closed(),
    }
}

/// `f = 2 f^- 1{f^- > 0}`, valid when `f >= 0` and `f f-check = 0`.
pub fn reconstruct_from_odd<T: Scalar>(fm: &SphericalFunction<T>) -> Result<SphericalFunction<T>> {
    let defect = fm.oddness_defect();
    if defect > T::lit(ODD_TOLERANCE) {
        return Err(Error::Precondition(format!(
            "input is not odd: max |f(s) + f(-s)| = {defect:e}"
        )));
    }
    Ok(fm.map(|v| if v > T::zero() { T::lit(2.0) * v } else { T::zero() }))
}

/// Options for [`inverse_series`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseOptions {
    /// Highest series index `T`; degrees `1, 3, ..., 2T + 1` are used.
    pub truncation: usize,
    pub damping: Damping,
}

impl InverseOptions {
    pub fn new(truncation: usize) -> Self {
        Self {
            truncation,
            damping: Damping::None,
        }
    }
}

/// Truncated inverse of the hemispherical transform:
/// `f^-(gamma) ~ sum_{p=0}^T (1 / lambda_{2p+1,d}) int q_{2p+1,d}(gamma . s) g(s) d sigma(s)`,
/// evaluated at the nodes of `gamma_grid`.
pub fn inverse_series<T: Scalar>(
    g: &SphericalFunction<T>,
    options: InverseOptions,
    gamma_grid: Arc<SphericalGrid<T>>,
) -> Result<SphericalFunction<T>> {
    let d = g.grid.dimension();
    if gamma_grid.dimension() != d {
        return Err(Error::Domain("gamma grid dimension differs from input grid".into()));
    }
    let kernel = OddKernel::<T>::new(d, options.truncation, options.damping)?;
    let sgrid = g.grid.clone();
    let weighted: Vec<T> = g
        .values
        .iter()
        .zip(sgrid.weights())
        .map(|(&v, &w)| v * w)
        .collect();
    let values = (0..gamma_grid.len())
        .into_par_iter()
        .map(|i| {
            let gamma = gamma_grid.node(i);
            sgrid
                .nodes()
                .zip(&weighted)
                .map(|(s, &gw)| {
                    let t: T = gamma.iter().zip(s).map(|(&a, &b)| a * b).sum();
                    kernel.inverse(t) * gw
                })
                .sum()
        })
        .collect();
    Ok(SphericalFunction {
        grid: gamma_grid,
        values,
        interpolated: g.interpolated,
    })
}
