//! Fourier deconvolution of the root `E[phi(Y) | Theta, Gammabar] f(Theta, Gammabar)`
//! in the reparametrized model `R = 1{V - Theta - Gammabar Zbar > 0}` with a
//! scalar `Zbar`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local_poly::{rule_of_thumb, Kernel};
use crate::frame::SurveyFrame;
use crate::stats::{quantile_sorted, sorted};
use crate::{Error, Result};

/// Equally spaced closed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let axis = Self { lo, hi, points };
        axis.validate("axis")?;
        Ok(axis)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) || self.points < 2 {
            return Err(Error::Precondition(format!(
                "{name}: need lo < hi and at least 2 points, got [{}, {}] with {}",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| self.lo + h * i as f64).collect()
    }
}

/// Output `(theta, gammabar)` grid and the sampling grids of the first stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierGrids {
    pub theta: Axis,
    pub gammabar: Axis,
    /// Points of the per-slice `v` grid (spanning the observed `V` range).
    #[serde(default = "default_v_points")]
    pub v_points: usize,
    /// `Zbar` slices; `None` spans the 2%..98% sample quantiles with 33 points.
    #[serde(default)]
    pub zbar: Option<Axis>,
}

fn default_v_points() -> usize {
    256
}

impl FourierGrids {
    pub fn new(theta: Axis, gammabar: Axis) -> Self {
        Self { theta, gammabar, v_points: default_v_points(), zbar: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub kernel: Kernel,
    /// Bandwidth in `v`; rule of thumb at rate `n^{-1/6}` when unset.
    pub bandwidth_v: Option<f64>,
    /// Bandwidth in `zbar`; rule of thumb at rate `n^{-1/6}` when unset.
    pub bandwidth_z: Option<f64>,
    /// Minimum number of points in a local fit window before widening.
    pub min_points: usize,
    /// Raised-cosine roll-off: flat response up to `(1 - rolloff) cutoff`,
    /// cosine taper to zero at `cutoff`.
    pub rolloff: f64,
    /// Ratio of the `zeta` cutoff to the `s` cutoff (elliptical filter).
    pub aspect: f64,
    pub derivative: Derivative,
    pub fill: WedgeFill,
}

/// Interpolation across the unidentified wedge, along `s` at fixed `zeta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WedgeFill {
    /// Cubic in the transform values.
    #[default]
    Value,
    /// Cubic in the log transform; exact for Gaussian laws but amplifies
    /// first-stage noise.
    Cumulant,
}

/// How the `v`-derivative enters the slice transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivative {
    /// Slope coefficient of each local linear fit.
    LocalSlope,
    /// Increments of the fitted level curve; tolerates a much smaller `v`
    /// bandwidth.
    #[default]
    FittedLevel,
}

impl FourierConfig {
    /// Largest frequency on either axis; validates the filter parameters.
    fn reach(&self, cutoff: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Precondition(format!("rolloff must lie in [0, 1], got {}", self.rolloff)));
        }
        if !(self.aspect > 0.0 && self.aspect.is_finite()) {
            return Err(Error::Precondition(format!("aspect must be positive, got {}", self.aspect)));
        }
        Ok(cutoff * self.aspect.max(1.0))
    }
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self { kernel: Kernel::Epanechnikov, bandwidth_v: None, bandwidth_z: None, min_points: 10, rolloff: 0.5, aspect: 1.0, derivative: Derivative::default(), fill: WedgeFill::default() }
    }
}

/// `b(s, zbar) = int e^{isv} a(v, zbar) dv` on a frequency grid per slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceTransform {
    pub s: Vec<f64>,
    pub zbar: Vec<f64>,
    /// `values[slice][k]` at `s[k]`.
    pub values: Vec<Vec<Complex64>>,
}

impl SliceTransform {
    /// Tabulates a known transform, e.g. a characteristic function.
    pub fn from_fn(s: Vec<f64>, zbar: Vec<f64>, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = zbar.iter().map(|&z| s.iter().map(|&s| f(s, z)).collect()).collect();
        Self { s, zbar, values }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierEstimate {
    pub theta: Vec<f64>,
    pub gammabar: Vec<f64>,
    /// Row-major over `theta`: `values[i * gammabar.len() + j]`.
    pub values: Vec<f64>,
    pub cutoff: f64,
    /// `|Im| / |Re|` of the inverse transform, in L².
    pub imaginary_residue: f64,
    /// Share of the frequency disk outside the identified wedge, filled by
    /// interpolation along `s`.
    pub filled_share: f64,
    pub zbar: Vec<f64>,
    /// `b(0, zbar)` per slice; estimates `E[phi(Y)]` on every slice.
    pub s0_slice: Vec<f64>,
    pub bandwidth_v: f64,
    pub bandwidth_z: f64,
    /// Local fits whose window had to be widened.
    pub widened: usize,
}

impl FourierEstimate {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.gammabar.len() + j]
    }

    /// Trapezoid integral over the output grid.
    pub fn integral(&self) -> f64 {
        let (nt, ng) = (self.theta.len(), self.gammabar.len());
        let dt = (self.theta[nt - 1] - self.theta[0]) / (nt - 1) as f64;
        let dg = (self.gammabar[ng - 1] - self.gammabar[0]) / (ng - 1) as f64;
        let w = |k: usize, n: usize| if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        let mut acc = 0.0;
        for i in 0..nt {
            for j in 0..ng {
                acc += w(i, nt) * w(j, ng) * self.at(i, j);
            }
        }
        acc * dt * dg
    }
}

/// Symmetric frequency grid used for both `s` and `zeta`. Its spacing makes
/// the period of the discrete inverse twice the larger output range.
pub fn frequency_grid(theta: &Axis, gammabar: &Axis, cutoff: f64) -> Result<Vec<f64>> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::Precondition(format!("cutoff must be positive, got {cutoff}")));
    }
    let span = (theta.hi - theta.lo).max(gammabar.hi - gammabar.lo);
    let step = PI / span;
    let half = (cutoff / step).ceil() as usize;
    Ok((0..=2 * half).map(|k| (k as f64 - half as f64) * step).collect())
}

/// Full estimator: [`slice_transform`] followed by [`invert_slices`].
/// `frame.z` must hold the columns `(V, Zbar)`.
pub fn fourier_root(
    frame: &SurveyFrame,
    phi: impl Fn(f64) -> f64,
    grids: &FourierGrids,
    cutoff: f64,
    config: &FourierConfig,
) -> Result<FourierEstimate> {
    let fit = slice_transform(frame, phi, grids, cutoff, config)?;
    let mut est = invert_slices(&fit.table, &grids.theta, &grids.gammabar, cutoff, config)?;
    est.bandwidth_v = fit.bandwidth_v;
    est.bandwidth_z = fit.bandwidth_z;
    est.widened = fit.widened;
    Ok(est)
}

/// First stage with its bandwidths.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceFit {
    pub table: SliceTransform,
    pub bandwidth_v: f64,
    pub bandwidth_z: f64,
    pub widened: usize,
}

/// Local linear fits of `E[phi(Y) R | V = v, Zbar = zbar]` on a `v` grid per
/// `zbar` slice and the Fourier transform in `v` of their `v`-derivative.
pub fn slice_transform(
    frame: &SurveyFrame,
    phi: impl Fn(f64) -> f64,
    grids: &FourierGrids,
    cutoff: f64,
    config: &FourierConfig,
) -> Result<SliceFit> {
    grids.theta.validate("theta grid")?;
    grids.gammabar.validate("gammabar grid")?;
    if frame.z.width() != 2 {
        return Err(Error::Capability(format!(
            "Fourier root needs instruments (V, Zbar) with scalar Zbar, got {} columns",
            frame.z.width()
        )));
    }
    if grids.v_points < 8 {
        return Err(Error::Precondition("v grid needs at least 8 points".into()));
    }
    let n = frame.len();
    if n < 4 * config.min_points.max(3) {
        return Err(Error::InsufficientData(format!("{n} units are too few for the Fourier root")));
    }
    let v = frame.z.column(0);
    let z = frame.z.column(1);
    let y = frame.phi_r(&phi);
    let rate = (n as f64).powf(0.2 - 1.0 / 6.0);
    let hv = resolve(config.bandwidth_v, || rule_of_thumb(&v) * rate, "bandwidth_v")?;
    let hz = resolve(config.bandwidth_z, || rule_of_thumb(&z) * rate, "bandwidth_z")?;
    let zaxis = match grids.zbar {
        Some(a) => {
            a.validate("zbar grid")?;
            a
        }
        None => {
            let zs = sorted(&z);
            Axis::new(quantile_sorted(&zs, 0.02), quantile_sorted(&zs, 0.98), 33)
                .map_err(|_| Error::Data("Zbar has no spread".into()))?
        }
    };
    let s = frequency_grid(&grids.theta, &grids.gammabar, config.reach(cutoff)?)?;

    // Units in canonical (zbar, v, y) order.
    let mut units: Vec<(f64, f64, f64)> = (0..n).map(|i| (z[i], v[i], y[i])).collect();
    units.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let zs: Vec<f64> = units.iter().map(|u| u.0).collect();

    let ctx = SliceContext { units: &units, zs: &zs, hv, hz, kernel: config.kernel, min_points: config.min_points.max(3), derivative: config.derivative };
    let slices: Vec<(Vec<Complex64>, usize)> = zaxis
        .values()
        .par_iter()
        .map(|&z0| ctx.transform(z0, grids.v_points, &s))
        .collect::<Result<_>>()?;
    let widened = slices.iter().map(|s| s.1).sum();
    let table = SliceTransform { s, zbar: zaxis.values(), values: slices.into_iter().map(|s| s.0).collect() };
    Ok(SliceFit { table, bandwidth_v: hv, bandwidth_z: hz, widened })
}

fn resolve(given: Option<f64>, default: impl FnOnce() -> f64, name: &str) -> Result<f64> {
    match given {
        Some(h) if h > 0.0 && h.is_finite() => Ok(h),
        Some(h) => Err(Error::Precondition(format!("{name} must be positive, got {h}"))),
        None => {
            let h = default();
            if h > 0.0 && h.is_finite() {
                Ok(h)
            } else {
                Err(Error::Data(format!("cannot choose {name}: instrument has no spread")))
            }
        }
    }
}

struct SliceContext<'a> {
    units: &'a [(f64, f64, f64)],
    zs: &'a [f64],
    hv: f64,
    hz: f64,
    kernel: Kernel,
    min_points: usize,
    derivative: Derivative,
}

impl SliceContext<'_> {
    /// Transform of the `v`-slope on the slice `zbar = z0`, and the number of
    /// widened fits.
    fn transform(&self, z0: f64, v_points: usize, s: &[f64]) -> Result<(Vec<Complex64>, usize)> {
        let top = s.last().copied().unwrap_or(0.0);
        let mut hz = self.hz;
        let mut window: Vec<(f64, f64, f64)> = Vec::new();
        for _ in 0..8 {
            let lo = self.zs.partition_point(|&x| x <= z0 - hz);
            let hi = self.zs.partition_point(|&x| x < z0 + hz);
            if hi - lo >= 4 * self.min_points {
                window = self.units[lo..hi].to_vec();
                break;
            }
            hz *= 2.0;
        }
        if window.is_empty() {
            return Err(Error::InsufficientData(format!("no data near zbar = {z0}")));
        }
        window.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)).then(a.2.total_cmp(&b.2)));
        let vs: Vec<f64> = window.iter().map(|u| u.1).collect();
        let vaxis = Axis { lo: vs[0], hi: vs[vs.len() - 1], points: v_points };
        if !(vaxis.hi > vaxis.lo) {
            return Err(Error::Data(format!("V has no spread near zbar = {z0}")));
        }
        let dv = vaxis.step();
        if dv * top >= PI {
            let need = ((vaxis.hi - vaxis.lo) * top / PI).ceil() as usize + 2;
            return Err(Error::Precondition(format!(
                "v grid too coarse for frequencies up to {top:.3}: spacing {dv:.4} needs to be below {:.4}; use at least {need} points",
                PI / top
            )));
        }
        let mut widened = 0;
        let fits: Vec<(f64, f64)> = vaxis
            .values()
            .iter()
            .map(|&v0| {
                let (fit, w) = self.fit(&window, &vs, v0, z0, hz);
                widened += w as usize;
                fit
            })
            .collect();
        // Exact transforms of piecewise-linear interpolants; each cell
        // contributes `increment * e^{is mid} * sinc(s dv / 2)`.
        let increments: Vec<(f64, f64)> = match self.derivative {
            Derivative::LocalSlope => {
                // Slope interpolant integrated cell by cell (trapezoid in value).
                fits.windows(2)
                    .enumerate()
                    .map(|(k, w)| (0.5 * (w[0].1 + w[1].1) * dv, vaxis.lo + dv * (k as f64 + 0.5)))
                    .collect()
            }
            Derivative::FittedLevel => fits
                .windows(2)
                .enumerate()
                .map(|(k, w)| (w[1].0 - w[0].0, vaxis.lo + dv * (k as f64 + 0.5)))
                .collect(),
        };
        let values = s
            .iter()
            .map(|&sk| {
                let x = 0.5 * sk * dv;
                let sinc = if x == 0.0 { 1.0 } else { x.sin() / x };
                increments.iter().map(|&(c, mid)| Complex64::from_polar(c * sinc, sk * mid)).sum()
            })
            .collect();
        Ok((values, widened))
    }

    /// Local linear fit in `(v - v0, z - z0)`; returns level and `v` slope.
    fn fit(&self, window: &[(f64, f64, f64)], vs: &[f64], v0: f64, z0: f64, hz: f64) -> ((f64, f64), bool) {
        let mut hv = self.hv;
        for attempt in 0..8 {
            let lo = vs.partition_point(|&x| x <= v0 - hv);
            let hi = vs.partition_point(|&x| x < v0 + hv);
            if hi - lo >= self.min_points {
                let mut m = Matrix3::<f64>::zeros();
                let mut b = Vector3::<f64>::zeros();
                for &(z, v, y) in &window[lo..hi] {
                    let (dv, dz) = (v - v0, z - z0);
                    let w = self.kernel.weight(dv / hv) * self.kernel.weight(dz / hz);
                    if w == 0.0 {
                        continue;
                    }
                    let x = Vector3::new(1.0, dv / hv, dz / hz);
                    m += w * x * x.transpose();
                    b += w * y * x;
                }
                if let Some(sol) = m.cholesky().map(|c| c.solve(&b)) {
                    return ((sol[0], sol[1] / hv), attempt > 0);
                }
            }
            hv *= 2.0;
        }
        ((0.0, 0.0), true)
    }
}

/// Change of variables `(s, s zbar) -> (s, zeta)` by linear interpolation
/// across slices, fill of the unidentified wedge `|zeta| > |s| max|zbar|`
/// by cubic interpolation along `s`, Hermitian symmetrization, and a 2D
/// inverse transform under a raised-cosine filter with semi-axes `cutoff`
/// (in `s`) and `aspect * cutoff` (in `zeta`).
pub fn invert_slices(
    slices: &SliceTransform,
    theta: &Axis,
    gammabar: &Axis,
    cutoff: f64,
    config: &FourierConfig,
) -> Result<FourierEstimate> {
    let rolloff = config.rolloff;
    let reach = config.reach(cutoff)?;
    theta.validate("theta grid")?;
    gammabar.validate("gammabar grid")?;
    let freq = frequency_grid(theta, gammabar, reach)?;
    if slices.s != freq {
        return Err(Error::Precondition("slice frequencies differ from the frequency grid".into()));
    }
    let nz = slices.zbar.len();
    if nz < 2 || slices.values.len() != nz || slices.zbar.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("need at least 2 increasing zbar slices".into()));
    }
    let (zlo, zhi) = (slices.zbar[0], slices.zbar[nz - 1]);
    let m = freq.len();
    let mid = m / 2;
    let step = freq[1] - freq[0];

    // grid[a][b] at (tau, zeta) = (freq[a], freq[b]).
    let mut grid = vec![vec![None::<Complex64>; m]; m];
    let s0 = slices.values.iter().map(|v| v[mid]).sum::<Complex64>() / nz as f64;
    for (a, row) in grid.iter_mut().enumerate() {
        let tau = freq[a];
        for (b, cell) in row.iter_mut().enumerate() {
            let zeta = freq[b];
            if a == mid {
                if b == mid {
                    *cell = Some(s0);
                }
                continue;
            }
            let zb = zeta / tau;
            if zb < zlo || zb > zhi {
                continue;
            }
            let k = slices.zbar.partition_point(|&x| x <= zb).clamp(1, nz - 1);
            let t = (zb - slices.zbar[k - 1]) / (slices.zbar[k] - slices.zbar[k - 1]);
            *cell = Some(slices.values[k - 1][a] * (1.0 - t) + slices.values[k][a] * t);
        }
    }

    let radius = |a: usize, b: usize| (freq[a] / cutoff).hypot(freq[b] / (cutoff * config.aspect));
    let inside = |a: usize, b: usize| radius(a, b) < 1.0;
    let bound = s0.norm();
    let mut disk = 0usize;
    let mut filled = 0usize;
    let mut full = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for b in 0..m {
        let known: Vec<usize> = (0..m).filter(|&a| grid[a][b].is_some()).collect();
        for a in 0..m {
            if inside(a, b) {
                disk += 1;
            }
            full[a][b] = match grid[a][b] {
                Some(c) => c,
                None => {
                    if inside(a, b) {
                        filled += 1;
                    }
                    fill(&freq, &known, |i| grid[i][b].unwrap(), a, config.fill, bound)
                }
            };
        }
    }

    // Hermitian symmetrization: F(-tau, -zeta) = conj F(tau, zeta).
    let mut sym = full.clone();
    for a in 0..m {
        for b in 0..m {
            sym[a][b] = 0.5 * (full[a][b] + full[m - 1 - a][m - 1 - b].conj());
        }
    }
    let filter = |a: usize, b: usize| {
        let r = radius(a, b);
        let flat = 1.0 - rolloff;
        if r <= flat {
            1.0
        } else if r < 1.0 {
            0.5 * (1.0 + (PI * (r - flat) / rolloff).cos())
        } else {
            0.0
        }
    };

    let th = theta.values();
    let gb = gammabar.values();
    // partial[a][j] = sum_b w F e^{-i zeta_b gamma_j}
    let partial: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            gb.iter()
                .map(|&g| (0..m).map(|b| sym[a][b] * filter(a, b) * Complex64::from_polar(1.0, -freq[b] * g)).sum())
                .collect()
        })
        .collect();
    let scale = step * step / (4.0 * PI * PI);
    let complex: Vec<Complex64> = th
        .par_iter()
        .flat_map_iter(|&t| {
            let partial = &partial;
            let freq = &freq;
            (0..gb.len())
                .map(move |j| (0..m).map(|a| partial[a][j] * Complex64::from_polar(1.0, -freq[a] * t)).sum::<Complex64>() * scale)
        })
        .collect();
    let re: f64 = complex.iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
    let im: f64 = complex.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if !complex.iter().all(|c| c.re.is_finite()) {
        return Err(Error::Numerical("non-finite Fourier inverse".into()));
    }
    Ok(FourierEstimate {
        theta: th,
        gammabar: gb,
        values: complex.iter().map(|c| c.re).collect(),
        cutoff,
        imaginary_residue: if re > 0.0 { im / re } else { 0.0 },
        filled_share: if disk > 0 { filled as f64 / disk as f64 } else { 0.0 },
        zbar: slices.zbar.clone(),
        s0_slice: slices.values.iter().map(|v| v[mid].re).collect(),
        bandwidth_v: f64::NAN,
        bandwidth_z: f64::NAN,
        widened: 0,
    })
}

/// Cubic (or lower-order) Lagrange interpolation at `freq[a]` through up to
/// two known nodes on each side; zero when one side has none. The cumulant
/// mode interpolates `log F` (magnitude and unwrapped phase) and caps the
/// magnitude at `bound`.
fn fill(
    freq: &[f64],
    known: &[usize],
    value: impl Fn(usize) -> Complex64,
    a: usize,
    mode: WedgeFill,
    bound: f64,
) -> Complex64 {
    let split = known.partition_point(|&k| k < a);
    let left = &known[split.saturating_sub(2)..split];
    let right = &known[split..(split + 2).min(known.len())];
    if left.is_empty() || right.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let nodes: Vec<usize> = left.iter().chain(right).copied().collect();
    let x = freq[a];
    let basis: Vec<f64> = nodes
        .iter()
        .map(|&i| nodes.iter().filter(|&&j| j != i).map(|&j| (x - freq[j]) / (freq[i] - freq[j])).product())
        .collect();
    let values: Vec<Complex64> = nodes.iter().map(|&i| value(i)).collect();
    let linear = || values.iter().zip(&basis).map(|(v, l)| v * l).sum::<Complex64>();
    if mode == WedgeFill::Value || values.iter().any(|v| !(v.norm() > f64::MIN_POSITIVE)) {
        return linear();
    }
    let mut phase: Vec<f64> = Vec::with_capacity(values.len());
    for v in &values {
        let arg = v.arg();
        let unwrapped = match phase.last() {
            None => arg,
            Some(&prev) => prev + (arg - prev + PI).rem_euclid(2.0 * PI) - PI,
        };
        phase.push(unwrapped);
    }
    let log_mag: f64 = values.iter().zip(&basis).map(|(v, l)| v.norm().ln() * l).sum();
    let arg: f64 = phase.iter().zip(&basis).map(|(p, l)| p * l).sum();
    Complex64::from_polar(log_mag.exp().min(bound), arg)
}
