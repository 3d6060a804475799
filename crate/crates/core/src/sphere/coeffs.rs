//! Coefficients of the odd-degree inversion series of the hemispherical
//! transform: eigenvalues `lambda_{2p+1,d}`, harmonic multiplicities
//! `L(k,d)` and the reproducing kernels `q_{k,d}`.

use super::gegenbauer::GegenbauerBasis;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Surface area `|S^m|` of the unit sphere in `R^{m+1}`.
///
/// Uses `|S^m| = 2 pi / (m - 1) |S^{m-2}|` from `|S^0| = 2`, `|S^1| = 2 pi`.
pub fn sphere_area<T: Scalar>(m: usize) -> T {
    let two_pi = T::lit(2.0) * T::PI();
    let mut area = if m % 2 == 0 { T::lit(2.0) } else { two_pi };
    let mut k = if m % 2 == 0 { 0 } else { 1 };
    while k < m {
        k += 2;
        area = area * two_pi / T::from_usize_lossy(k - 1);
    }
    area
}

/// Dimension `L(k,d)` of the space of degree-`k` spherical harmonics on `S^{d-1}`:
/// `(2k+d-2) (k+d-2)! / (k! (d-2)! (k+d-2))`, with `L(0,d) = 1`.
pub fn multiplicity<T: Scalar>(k: usize, d: usize) -> T {
    assert!(d >= 2, "multiplicity needs d >= 2");
    if k == 0 {
        return T::one();
    }
    // (k+d-2)! / (k! (d-2)!) = binom(k+d-2, d-2)
    let mut binom = T::one();
    for j in 1..=(d - 2) {
        binom = binom * T::from_usize_lossy(k + j) / T::from_usize_lossy(j);
    }
    T::from_usize_lossy(2 * k + d - 2) * binom / T::from_usize_lossy(k + d - 2)
}

/// Eigenvalue `lambda_{2p+1,d}` of the hemispherical transform on
/// degree-`2p+1` harmonics:
/// `(-1)^p |S^{d-2}| 1*3*...*(2p-1) / ((d-1)(d+1)...(d+2p-1))`.
pub fn lambda_coeff<T: Scalar>(d: usize, p: usize) -> Result<T> {
    if d < 2 {
        return Err(Error::Domain(format!("lambda needs d >= 2, got {d}")));
    }
    let mut value = sphere_area::<T>(d - 2) / T::from_usize_lossy(d - 1);
    for j in 1..=p {
        value = -value * T::from_usize_lossy(2 * j - 1) / T::from_usize_lossy(d + 2 * j - 1);
    }
    Ok(value)
}

/// `q_{k,d}(t) = L(k,d) C_k(t) / (|S^{d-1}| C_k(1))` for odd `k`.
pub fn q_eval<T: Scalar>(basis: &GegenbauerBasis<T>, k: usize, t: T) -> Result<T> {
    if k % 2 == 0 {
        return Err(Error::Domain(format!(
            "q_{{k,d}} is only used with odd degree, got k = {k}"
        )));
    }
    let d = basis.dimension();
    let ck = basis.eval(k, t)?;
    let ck1 = basis.eval(k, T::one())?;
    Ok(multiplicity::<T>(k, d) * ck / (sphere_area::<T>(d - 1) * ck1))
}

/// Spectral damping applied to the odd-degree series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    #[default]
    None,
    /// `w_p = (1 + cos(pi p / (T + 1))) / 2`.
    RaisedCosine,
}

impl Damping {
    pub fn weight<T: Scalar>(self, p: usize, truncation: usize) -> T {
        match self {
            Damping::None => T::one(),
            Damping::RaisedCosine => {
                let x = T::PI() * T::from_usize_lossy(p) / T::from_usize_lossy(truncation + 1);
                (T::one() + x.cos()) / T::lit(2.0)
            }
        }
    }
}

/// Precomputed odd-degree kernels `q_{2p+1,d}`, `p = 0..=T`.
///
/// `values` returns every `q_{2p+1,d}(t)` from a single Gegenbauer sweep;
/// `inverse` folds them with `w_p / lambda_{2p+1,d}` into the truncated
/// inverse kernel.
#[derive(Debug, Clone)]
pub struct OddKernel<T> {
    basis: GegenbauerBasis<T>,
    truncation: usize,
    /// `C_{k+2} = a_k t C_{k+1} - b_k C_k`.
    rec_a: Vec<T>,
    rec_b: Vec<T>,
    /// `w_p q_{2p+1,d} / lambda_{2p+1,d}` coefficient on `C_{2p+1}`.
    inv_coef: Vec<T>,
    /// `L(k,d) / (|S^{d-1}| C_k(1))` for `k = 2p+1`.
    scale: Vec<T>,
    /// `w_p / lambda_{2p+1,d}`.
    inv_lambda: Vec<T>,
}

impl<T: Scalar> OddKernel<T> {
    pub fn new(d: usize, truncation: usize, damping: Damping) -> Result<Self> {
        let basis = GegenbauerBasis::for_truncation(d, truncation)?;
        let mut at_one = vec![T::zero(); basis.kmax() + 1];
        basis.fill(T::one(), &mut at_one);
        let area = sphere_area::<T>(d - 1);
        let mut scale = Vec::with_capacity(truncation + 1);
        let mut inv_lambda = Vec::with_capacity(truncation + 1);
        for p in 0..=truncation {
            let k = 2 * p + 1;
            scale.push(multiplicity::<T>(k, d) / (area * at_one[k]));
            inv_lambda.push(damping.weight::<T>(p, truncation) / lambda_coeff::<T>(d, p)?);
        }
        let kmax = basis.kmax();
        let mu = basis.mu();
        let two = T::lit(2.0);
        let (mut rec_a, mut rec_b) = (Vec::with_capacity(kmax), Vec::with_capacity(kmax));
        for k in 0..kmax.saturating_sub(1) {
            let kf = T::from_usize_lossy(k);
            if k == 0 && mu == T::zero() {
                // C_2^0 = (2/2) T_2 = t C_1 - C_0
                rec_a.push(T::one());
                rec_b.push(T::one());
            } else {
                rec_a.push(two * (mu + kf + T::one()) / (kf + two));
                rec_b.push((two * mu + kf) / (kf + two));
            }
        }
        let inv_coef = scale.iter().zip(&inv_lambda).map(|(&s, &l)| s * l).collect();
        Ok(Self {
            basis,
            truncation,
            rec_a,
            rec_b,
            inv_coef,
            scale,
            inv_lambda,
        })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    /// Writes `q_{2p+1,d}(t)` for `p = 0..=T` into `out`; `scratch` needs
    /// `2T + 2` entries.
    pub fn values(&self, t: T, scratch: &mut [T], out: &mut [T]) {
        let t = t.max(-T::one()).min(T::one());
        self.sweep(t, &mut scratch[..2 * self.truncation + 2]);
        for (p, o) in out.iter_mut().enumerate().take(self.truncation + 1) {
            *o = self.scale[p] * scratch[2 * p + 1];
        }
    }

    fn sweep(&self, t: T, out: &mut [T]) {
        out[0] = T::one();
        out[1] = self.basis.eval_first(t);
        for k in 0..out.len() - 2 {
            out[k + 2] = self.rec_a[k] * t * out[k + 1] - self.rec_b[k] * out[k];
        }
    }

    /// `sum_p w_p q_{2p+1,d}(t) / lambda_{2p+1,d}`.
    pub fn inverse(&self, t: T) -> T {
        let t = t.max(-T::one()).min(T::one());
        let mut prev = T::one();
        let mut cur = self.basis.eval_first(t);
        let mut acc = self.inv_coef[0] * cur;
        for p in 1..=self.truncation {
            let k = 2 * p - 1;
            let even = self.rec_a[k - 1] * t * cur - self.rec_b[k - 1] * prev;
            let odd = self.rec_a[k] * t * even - self.rec_b[k] * cur;
            acc += self.inv_coef[p] * odd;
            prev = even;
            cur = odd;
        }
        acc
    }

    pub fn inv_lambda(&self) -> &[T] {
        &self.inv_lambda
    }

    pub fn scratch(&self) -> Vec<T> {
        vec![T::zero(); 2 * self.truncation + 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn areas() {
        assert_eq!(sphere_area::<f64>(0), 2.0);
        assert!((sphere_area::<f64>(1) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area::<f64>(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area::<f64>(3) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn multiplicities() {
        for k in 1..10 {
            assert_eq!(multiplicity::<f64>(k, 2), 2.0);
            assert_eq!(multiplicity::<f64>(k, 3), (2 * k + 1) as f64);
        }
        // d = 4: (k+1)^2
        assert!((multiplicity::<f64>(3, 4) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_values() {
        assert!((lambda_coeff::<f64>(3, 0).unwrap() - PI).abs() < 1e-12);
        assert!((lambda_coeff::<f64>(3, 1).unwrap() + PI / 4.0).abs() < 1e-12);
        assert!((lambda_coeff::<f64>(2, 0).unwrap() - 2.0).abs() < 1e-12);
        assert!((lambda_coeff::<f64>(2, 1).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!(lambda_coeff::<f64>(1, 0).is_err());
    }

    #[test]
    fn lambda_alternates_and_shrinks() {
        for d in [2usize, 3] {
            let l: Vec<f64> = (0..=10).map(|p| lambda_coeff(d, p).unwrap()).collect();
            for p in 0..10 {
                assert!(l[p] * l[p + 1] < 0.0);
                assert!(l[p + 1].abs() < l[p].abs());
            }
        }
    }

    #[test]
    fn q_values() {
        let b = GegenbauerBasis::<f64>::new(3, 5).unwrap();
        for &t in &[-0.9, -0.2, 0.0, 0.3, 1.0] {
            assert!((q_eval(&b, 1, t).unwrap() - 3.0 * t / (4.0 * PI)).abs() < 1e-12);
        }
        assert!((q_eval(&b, 3, 1.0).unwrap() - 7.0 / (4.0 * PI)).abs() < 1e-12);
        assert!(matches!(q_eval(&b, 2, 0.1), Err(Error::Domain(_))));
        let b2 = GegenbauerBasis::<f64>::new(2, 5).unwrap();
        for k in [1usize, 3, 5] {
            assert!((q_eval(&b2, k, 1.0).unwrap() - 2.0 / (2.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_matches_scalar_path() {
        let kern = OddKernel::<f64>::new(3, 4, Damping::None).unwrap();
        let b = GegenbauerBasis::<f64>::new(3, 9).unwrap();
        let mut scratch = kern.scratch();
        let mut out = vec![0.0; 5];
        kern.values(0.37, &mut scratch, &mut out);
        let mut acc = 0.0;
        for p in 0..=4 {
            let q = q_eval(&b, 2 * p + 1, 0.37).unwrap();
            assert!((out[p] - q).abs() < 1e-14);
            acc += q / lambda_coeff::<f64>(3, p).unwrap();
        }
        assert!((kern.inverse(0.37) - acc).abs() < 1e-12);
    }
}
