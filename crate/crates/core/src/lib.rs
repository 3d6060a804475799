//! Nonparametric identification and estimation for endogenous selection
//! (missing-not-at-random outcomes), built around the hemispherical
//! transform on `S^{d-1}` and applied to survey imputation of nonrespondents
//! and Gini-index confidence intervals.
//!
//! The spherical layer ([`sphere`], [`transform`]) and the Gini estimator
//! are generic over the floating-point type; the statistical layers work in
//! `f64`. Aliases for the common `f64` instantiations live at the crate root.

pub mod error;
pub mod estimators;
pub mod frame;
pub mod scalar;
pub mod selection;
pub mod sphere;
pub mod stats;
pub mod survey;
pub mod table;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` grid on the sphere.
pub type Grid = sphere::SphericalGrid<f64>;
/// `f64` grid function.
pub type GridFunction = transform::SphericalFunction<f64>;
/// `f64` Gegenbauer recursion.
pub type Gegenbauer = sphere::GegenbauerBasis<f64>;
