//! Special functions and quadrature on the unit sphere `S^{d-1}`, `d in {2, 3}`.

mod coeffs;
mod gegenbauer;
mod grid;
mod quadrature;

pub use coeffs::{lambda_coeff, multiplicity, q_eval, sphere_area, Damping, OddKernel};
pub use gegenbauer::GegenbauerBasis;
pub use grid::{dot, hemisphere_q_integral, hemisphere_q_integrals, SphericalGrid};
pub use quadrature::gauss_legendre;

use crate::error::{Error, Result};

/// Grids, transforms and simulators are implemented for `d = 2` and `d = 3`.
pub fn check_dimension(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::Capability(format!(
            "dimension d = {d} not supported (d must be 2 or 3)"
        )))
    }
}
