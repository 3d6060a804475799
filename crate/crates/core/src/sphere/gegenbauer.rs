//! Gegenbauer polynomials `C_k^mu` with `mu = (d - 2) / 2`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Recursion state for `C_k^mu`, `k = 0..=kmax`, on `S^{d-1}`.
///
/// For `mu = 0` (`d = 2`) the polynomials are normalized as
/// `C_k^0 = (2 / k) T_k` for `k >= 1` and `C_0^0 = 1`, which is the limit
/// of `C_k^mu / mu` and keeps `C_1^0(t) = 2t`. The three-term recursion
/// then holds for every `k >= 1`; only the first step `C_0 -> C_2` has to
/// be seeded explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GegenbauerBasis<T> {
    d: usize,
    mu: T,
    kmax: usize,
}

impl<T: Scalar> GegenbauerBasis<T> {
    pub fn new(d: usize, kmax: usize) -> Result<Self> {
        super::check_dimension(d)?;
        Ok(Self {
            d,
            mu: T::lit((d as f64 - 2.0) / 2.0),
            kmax,
        })
    }

    /// Basis sized for a series truncated at `truncation`: `kmax = 2T + 1`.
    pub fn for_truncation(d: usize, truncation: usize) -> Result<Self> {
        Self::new(d, 2 * truncation + 1)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    /// `C_k^mu(t)`.
    pub fn eval(&self, k: usize, t: T) -> Result<T> {
        if k > self.kmax {
            return Err(Error::Capability(format!(
                "Gegenbauer degree {k} exceeds kmax = {}",
                self.kmax
            )));
        }
        if !(t.abs() <= T::one()) {
            return Err(Error::Domain(format!("|t| = {} > 1", t.abs())));
        }
        let mut out = vec![T::zero(); k + 1];
        self.fill(t, &mut out);
        Ok(out[k])
    }

    /// `C_1(t)`.
    #[inline]
    pub fn eval_first(&self, t: T) -> T {
        let two = T::lit(2.0);
        if self.mu == T::zero() {
            two * t
        } else {
            two * self.mu * t
        }
    }

    /// Writes `C_0(t), ..., C_{n-1}(t)` into `out` (`n = out.len()`).
    /// No range checks: callers guarantee `|t| <= 1`.
    pub fn fill(&self, t: T, out: &mut [T]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        let two = T::lit(2.0);
        out[0] = T::one();
        if n == 1 {
            return;
        }
        let zero_mu = self.mu == T::zero();
        out[1] = if zero_mu { two * t } else { two * self.mu * t };
        if n == 2 {
            return;
        }
        out[2] = if zero_mu {
            // (2/2) T_2
            two * t * t - T::one()
        } else {
            self.step(0, t, out[1], out[0])
        };
        for k in 1..n.saturating_sub(2) {
            out[k + 2] = self.step(k, t, out[k + 1], out[k]);
        }
    }

    /// `(k+2) C_{k+2} = 2(mu+k+1) t C_{k+1} - (2mu+k) C_k`.
    #[inline]
    fn step(&self, k: usize, t: T, c_next: T, c_k: T) -> T {
        let kf = T::from_usize_lossy(k);
        let two = T::lit(2.0);
        (two * (self.mu + kf + T::one()) * t * c_next - (two * self.mu + kf) * c_k)
            / (kf + two)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre(k: usize, t: f64) -> f64 {
        // Bonnet recursion, independent of the Gegenbauer code path.
        let (mut p0, mut p1) = (1.0, t);
        if k == 0 {
            return p0;
        }
        for n in 1..k {
            let n = n as f64;
            let p2 = ((2.0 * n + 1.0) * t * p1 - n * p0) / (n + 1.0);
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn d3_first_degrees() {
        let b = GegenbauerBasis::<f64>::new(3, 10).unwrap();
        assert_eq!(b.eval(0, 0.3).unwrap(), 1.0);
        assert!((b.eval(1, 0.4).unwrap() - 0.4).abs() < 1e-15);
        assert!((b.eval(2, 1.0).unwrap() - 1.0).abs() < 1e-15);
        for k in 0..=10 {
            for &t in &[-1.0, -0.7, -0.1, 0.0, 0.35, 0.9, 1.0] {
                assert!((b.eval(k, t).unwrap() - legendre(k, t)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn d2_matches_chebyshev() {
        let b = GegenbauerBasis::<f64>::new(2, 12).unwrap();
        assert!((b.eval(1, 0.25).unwrap() - 0.5).abs() < 1e-15);
        for k in 1..=12 {
            for i in 0..=20 {
                let phi = std::f64::consts::PI * i as f64 / 20.0;
                let t = phi.cos();
                let expected = 2.0 / k as f64 * (k as f64 * phi).cos();
                assert!((b.eval(k, t).unwrap() - expected).abs() < 1e-12, "k={k} phi={phi}");
            }
        }
    }

    #[test]
    fn errors() {
        let b = GegenbauerBasis::<f64>::new(3, 3).unwrap();
        assert!(matches!(b.eval(4, 0.0), Err(Error::Capability(_))));
        assert!(matches!(b.eval(1, 1.5), Err(Error::Domain(_))));
        assert!(matches!(GegenbauerBasis::<f64>::new(4, 3), Err(Error::Capability(_))));
    }

    #[test]
    fn works_in_f32() {
        let b = GegenbauerBasis::<f32>::new(3, 4).unwrap();
        assert!((b.eval(2, 1.0f32).unwrap() - 1.0).abs() < 1e-6);
    }
}
