//! Antipodally closed quadrature grids on `S^1` and `S^2`.

use super::check_dimension;
use super::coeffs::OddKernel;
use super::quadrature::gauss_legendre;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parameter-space cell attached to a node. Cells tile the sphere, and the
/// surface measure is uniform in `(t, phi)` with `t = theta_1` (d = 3) and
/// in `phi` (d = 2), so area fractions can be computed in parameter space.
#[derive(Debug, Clone, Copy)]
struct Cell<T> {
    t_lo: T,
    t_hi: T,
    phi_lo: T,
    phi_hi: T,
    /// Upper bound on the chord distance from the node to any point of the cell.
    radius: T,
}

#[derive(Debug, Clone)]
enum Layout<T> {
    /// `n` equal arcs, node `j` at angle `2 pi (j + 1/2) / n`.
    Circle { n: usize },
    /// Composite Gauss–Legendre in `t = theta_1` times uniform azimuth.
    Product { polar: Vec<T>, n_az: usize },
}

/// Quadrature grid on `S^{d-1}`: unit nodes with positive weights in units of
/// surface measure. For `d = 3` the polar axis is `e_1`, so the half-sphere
/// `{s_1 >= 0}` is a union of whole cells.
#[derive(Debug, Clone)]
pub struct SphericalGrid<T> {
    d: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
    cells: Vec<Cell<T>>,
    antipode: Option<Vec<usize>>,
    layout: Layout<T>,
}

impl<T: Scalar> SphericalGrid<T> {
    /// `d = 2`: `resolution` equal-angle nodes, weights `2 pi / n`.
    /// `d = 3`: `2 * ceil(resolution / 2)` polar Gauss–Legendre nodes (a rule
    /// on each of `[-1, 0]` and `[0, 1]`) times `2 * resolution` azimuths.
    pub fn build(d: usize, resolution: usize) -> Result<Self> {
        check_dimension(d)?;
        if resolution < 8 {
            return Err(Error::Domain(format!(
                "grid resolution must be >= 8, got {resolution}"
            )));
        }
        Ok(if d == 2 {
            Self::circle(resolution)
        } else {
            Self::product(resolution)
        })
    }

    fn circle(n: usize) -> Self {
        let two_pi = T::lit(2.0) * T::PI();
        let h = two_pi / T::from_usize_lossy(n);
        let half = T::lit(0.5);
        let mut nodes = Vec::with_capacity(2 * n);
        let mut cells = Vec::with_capacity(n);
        for j in 0..n {
            let phi = (T::from_usize_lossy(j) + half) * h;
            nodes.push(phi.cos());
            nodes.push(phi.sin());
            cells.push(Cell {
                t_lo: T::zero(),
                t_hi: T::zero(),
                phi_lo: phi - half * h,
                phi_hi: phi + half * h,
                radius: h,
            });
        }
        let antipode = (n % 2 == 0).then(|| (0..n).map(|j| (j + n / 2) % n).collect());
        Self {
            d: 2,
            nodes,
            weights: vec![h; n],
            cells,
            antipode,
            layout: Layout::Circle { n },
        }
    }

    fn product(resolution: usize) -> Self {
        let half_count = resolution.div_ceil(2);
        let n_az = 2 * resolution;
        // Gauss–Legendre on [0, 1], mirrored onto [-1, 0].
        let (x, w) = gauss_legendre::<T>(half_count);
        let half = T::lit(0.5);
        let upper_t: Vec<T> = x.iter().map(|&x| half * (x + T::one())).collect();
        let upper_w: Vec<T> = w.iter().map(|&w| half * w).collect();
        let mut bounds = vec![T::zero()];
        for &w in &upper_w {
            let last = *bounds.last().expect("non-empty");
            bounds.push(last + w);
        }
        let last = bounds.len() - 1;
        bounds[last] = T::one();

        let mut polar = Vec::with_capacity(2 * half_count);
        let mut polar_w = Vec::with_capacity(2 * half_count);
        let mut polar_cell = Vec::with_capacity(2 * half_count);
        for i in (0..half_count).rev() {
            polar.push(-upper_t[i]);
            polar_w.push(upper_w[i]);
            polar_cell.push((-bounds[i + 1], -bounds[i]));
        }
        for i in 0..half_count {
            polar.push(upper_t[i]);
            polar_w.push(upper_w[i]);
            polar_cell.push((bounds[i], bounds[i + 1]));
        }

        let two_pi = T::lit(2.0) * T::PI();
        let h = two_pi / T::from_usize_lossy(n_az);
        let n_polar = polar.len();
        let mut nodes = Vec::with_capacity(3 * n_polar * n_az);
        let mut weights = Vec::with_capacity(n_polar * n_az);
        let mut cells = Vec::with_capacity(n_polar * n_az);
        for (i, &t) in polar.iter().enumerate() {
            let rho = (T::one() - t * t).max(T::zero()).sqrt();
            let (t_lo, t_hi) = polar_cell[i];
            for k in 0..n_az {
                let phi = (T::from_usize_lossy(k) + half) * h;
                nodes.push(t);
                nodes.push(rho * phi.cos());
                nodes.push(rho * phi.sin());
                weights.push(polar_w[i] * h);
                let corner = |tt: T, pp: T| {
                    let r = (T::one() - tt * tt).max(T::zero()).sqrt();
                    let dx = tt - t;
                    let dy = r * pp.cos() - rho * phi.cos();
                    let dz = r * pp.sin() - rho * phi.sin();
                    (dx * dx + dy * dy + dz * dz).sqrt()
                };
                let mut radius = T::zero();
                for &tt in &[t_lo, t, t_hi] {
                    for &pp in &[phi - half * h, phi, phi + half * h] {
                        radius = radius.max(corner(tt, pp));
                    }
                }
                cells.push(Cell {
                    t_lo,
                    t_hi,
                    phi_lo: phi - half * h,
                    phi_hi: phi + half * h,
                    radius: radius * T::lit(1.5),
                });
            }
        }
        let antipode = (0..n_polar * n_az)
            .map(|idx| {
                let (i, k) = (idx / n_az, idx % n_az);
                (n_polar - 1 - i) * n_az + (k + n_az / 2) % n_az
            })
            .collect();
        Self {
            d: 3,
            nodes,
            weights,
            cells,
            antipode: Some(antipode),
            layout: Layout::Product { polar, n_az },
        }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[T]> {
        self.nodes.chunks_exact(self.d)
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_weight(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// Quadrature sum `sum_i w_i v_i`.
    pub fn integrate(&self, values: &[T]) -> T {
        self.weights.iter().zip(values).map(|(&w, &v)| w * v).sum()
    }

    /// Index of the node antipodal to node `i`, if the grid is antipodally closed.
    pub fn antipode(&self, i: usize) -> Option<usize> {
        self.antipode.as_ref().map(|a| a[i])
    }

    pub fn is_antipodally_closed(&self) -> bool {
        self.antipode.is_some()
    }

    /// Fraction of the cell of node `i` lying in `{theta : <pole, theta> >= 0}`.
    ///
    /// Cells far from the great circle are all-in or all-out; cells it
    /// crosses use the exact area fraction of the rectangle cut by the
    /// linearized boundary. Antipodal cells receive complementary fractions.
    pub fn cap_fraction(&self, i: usize, pole: &[T]) -> T {
        let x = dot(self.node(i), pole);
        let cell = &self.cells[i];
        if x > cell.radius {
            return T::one();
        }
        if x < -cell.radius {
            return T::zero();
        }
        let half = T::lit(0.5);
        let pc = half * (cell.phi_lo + cell.phi_hi);
        let b = half * (cell.phi_hi - cell.phi_lo);
        let (c, alpha, a, beta) = if self.d == 2 {
            let c = pole[0] * pc.cos() + pole[1] * pc.sin();
            let beta = -pole[0] * pc.sin() + pole[1] * pc.cos();
            (c, T::zero(), T::zero(), beta)
        } else {
            let tc = half * (cell.t_lo + cell.t_hi);
            let a = half * (cell.t_hi - cell.t_lo);
            let rho = (T::one() - tc * tc).max(T::zero()).sqrt();
            let ring = pole[1] * pc.cos() + pole[2] * pc.sin();
            let c = pole[0] * tc + rho * ring;
            let alpha = if rho > T::zero() {
                pole[0] - tc / rho * ring
            } else {
                pole[0]
            };
            let beta = rho * (-pole[1] * pc.sin() + pole[2] * pc.cos());
            (c, alpha, a, beta)
        };
        prob_sum_uniform_ge(c, (alpha * a).abs(), (beta * b).abs())
    }

    /// Point on the sphere to grid parameters `(t, phi)` (`t` unused for `d = 2`).
    fn params(&self, x: &[T]) -> (T, T) {
        let two_pi = T::lit(2.0) * T::PI();
        let wrap = |phi: T| if phi < T::zero() { phi + two_pi } else { phi };
        if self.d == 2 {
            (T::zero(), wrap(x[1].atan2(x[0])))
        } else {
            (x[0], wrap(x[2].atan2(x[1])))
        }
    }

    /// Linear (d = 2) or bilinear in `(t, phi)` (d = 3) interpolation of
    /// node values at an arbitrary unit vector. Beyond the outermost polar
    /// rows the row value is held constant.
    pub fn interpolate(&self, values: &[T], x: &[T]) -> T {
        let (t, phi) = self.params(x);
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        let azimuth = |n: usize| {
            let h = two_pi / T::from_usize_lossy(n);
            let u = phi / h - half;
            let u = if u < T::zero() { u + T::from_usize_lossy(n) } else { u };
            let k0 = u.floor().to_usize().unwrap_or(0).min(n - 1);
            let frac = u - T::from_usize_lossy(k0);
            (k0, (k0 + 1) % n, frac)
        };
        match &self.layout {
            Layout::Circle { n } => {
                let (k0, k1, f) = azimuth(*n);
                values[k0] * (T::one() - f) + values[k1] * f
            }
            Layout::Product { polar, n_az } => {
                let (k0, k1, f) = azimuth(*n_az);
                let row = |i: usize| {
                    values[i * n_az + k0] * (T::one() - f) + values[i * n_az + k1] * f
                };
                let np = polar.len();
                if t <= polar[0] {
                    return row(0);
                }
                if t >= polar[np - 1] {
                    return row(np - 1);
                }
                let i1 = polar.partition_point(|&p| p < t).clamp(1, np - 1);
                let i0 = i1 - 1;
                let g = (t - polar[i0]) / (polar[i1] - polar[i0]);
                row(i0) * (T::one() - g) + row(i1) * g
            }
        }
    }

    /// Nearest node by parameter-space bracketing (used for binning samples).
    pub fn nearest(&self, x: &[T]) -> usize {
        let (t, phi) = self.params(x);
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        let az = |n: usize| {
            let h = two_pi / T::from_usize_lossy(n);
            (phi / h - half).round().to_isize().unwrap_or(0).rem_euclid(n as isize) as usize
        };
        match &self.layout {
            Layout::Circle { n } => az(*n),
            Layout::Product { polar, n_az } => {
                let np = polar.len();
                let i1 = polar.partition_point(|&p| p < t).min(np - 1);
                let i = if i1 > 0 && (t - polar[i1 - 1]).abs() < (polar[i1] - t).abs() {
                    i1 - 1
                } else {
                    i1
                };
                i * n_az + az(*n_az)
            }
        }
    }
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// `P(c + X >= 0)` where `X = U + V`, `U ~ U[-a, a]`, `V ~ U[-b, b]`.
fn prob_sum_uniform_ge<T: Scalar>(c: T, a: T, b: T) -> T {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    let tiny = T::epsilon();
    let half = T::lit(0.5);
    if a <= tiny {
        return if c > T::zero() {
            T::one()
        } else if c < T::zero() {
            T::zero()
        } else {
            half
        };
    }
    // CDF of X at x = -c, then complement.
    let x = -c;
    let cdf = |x: T| -> T {
        if x <= -(a + b) {
            T::zero()
        } else if x >= a + b {
            T::one()
        } else if b <= tiny {
            (x + a) / (T::lit(2.0) * a)
        } else if x <= -(a - b) {
            let u = x + a + b;
            u * u / (T::lit(8.0) * a * b)
        } else if x <= a - b {
            half + x / (T::lit(2.0) * a)
        } else {
            let u = a + b - x;
            T::one() - u * u / (T::lit(8.0) * a * b)
        }
    };
    T::one() - cdf(x)
}

/// Quadrature value of `int_{s_1 >= 0} q_{2p+1,d}(gamma . s) d sigma(s)`.
pub fn hemisphere_q_integral<T: Scalar>(
    d: usize,
    p: usize,
    gamma: &[T],
    grid: &SphericalGrid<T>,
) -> Result<T> {
    if grid.dimension() != d || gamma.len() != d {
        return Err(Error::Domain("dimension mismatch between grid and gamma".into()));
    }
    let norm = dot(gamma, gamma).sqrt();
    if (norm - T::one()).abs() > T::lit(1e-8) {
        return Err(Error::Domain(format!("gamma must be a unit vector, |gamma| = {norm}")));
    }
    let kernel = OddKernel::<T>::new(d, p, super::Damping::None)?;
    Ok(hemisphere_q_integrals(&kernel, gamma, grid)[p])
}

/// `int_{s_1 >= 0} q_{2p+1,d}(gamma . s) d sigma(s)` for every `p` of `kernel`.
pub fn hemisphere_q_integrals<T: Scalar>(kernel: &OddKernel<T>, gamma: &[T], grid: &SphericalGrid<T>) -> Vec<T> {
    let d = grid.dimension();
    let mut e1 = vec![T::zero(); d];
    e1[0] = T::one();
    let np = kernel.truncation() + 1;
    let mut scratch = kernel.scratch();
    let mut q = vec![T::zero(); np];
    let mut acc = vec![T::zero(); np];
    for i in 0..grid.len() {
        let frac = grid.cap_fraction(i, &e1);
        if frac == T::zero() {
            continue;
        }
        kernel.values(dot(gamma, grid.node(i)), &mut scratch, &mut q);
        let w = frac * grid.weight(i);
        for (a, &v) in acc.iter_mut().zip(&q) {
            *a += w * v;
        }
    }
    acc
}
