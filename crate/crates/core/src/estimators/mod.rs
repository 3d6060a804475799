//! Nonparametric estimators for the selection models: local polynomial
//! regression, propensity, identification at infinity, directional density,
//! the hemispherical series root, the nonrespondent CDF and the Fourier root.

mod boundary;
mod cdf;
mod directional;
mod fourier;
mod integral;
mod local_poly;
mod propensity;
mod series;

pub use boundary::{boundary_from_directions, directions, mean_at_boundary, BoundaryConfig, BoundaryEstimate, SideFit};
pub use cdf::{default_t_grid, isotonic, nonrespondent_cdf, CdfConfig, CdfEstimate, Method};
pub use directional::{directional_density, DirectionalConfig, DirectionalDensity};
pub use fourier::{fourier_root, frequency_grid, invert_slices, slice_transform, Axis, Derivative, SliceFit, WedgeFill, FourierConfig, FourierEstimate, FourierGrids, SliceTransform};
pub use integral::{mean_by_integral, mean_by_integral_with_propensity, IntegralConfig, IntegralEstimate};
pub use local_poly::{local_poly, rule_of_thumb, EquivalentWeights, Kernel, LocalPolyConfig, LocalPolyFit, LocalPolySmoother, PointFit};
pub use propensity::estimate_propensity;
pub use series::{series_coefficients, Centering, SeriesConfig, SeriesEstimate};
