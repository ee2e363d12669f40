//! Exact one-point eigenvalue densities of real and complex correlated
//! Wishart ensembles, with a Monte-Carlo simulator for validation.
//!
//! The complex case is evaluated from closed forms (a residue sum and an
//! equivalent determinant ratio); the real case goes through a twofold
//! singular integral over a cell partition of the positive axis, with
//! principal-value regularization of the 3/2-power singularities and an
//! independent epsilon-limit oracle for cross-checking.

pub mod checks;
pub mod complex_density;
pub mod error;
pub mod exec;
pub mod montecarlo;
pub mod numeric;
pub mod quadrature;
pub mod real_density;
pub mod spectrum;
pub mod symfun;

pub use error::{Result, WishartError};
pub use quadrature::{QuadResult, QuadratureConfig};
pub use spectrum::{validate_spectrum, Beta, DensityCurve, EmpiricalSpectrum};
