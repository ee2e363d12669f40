//! Self-consistency checks on the generating function: the unit value at
//! coincident arguments and the central-limit-theorem large-n limit. They
//! run in the test suite and under the CLI `validate` subcommand.

use num_complex::Complex64;

use crate::error::Result;
use crate::quadrature::QuadratureConfig;
use crate::real_density::z1_eq56;
use crate::spectrum::EmpiricalSpectrum;

/// |Z_1(x0, x0) - 1|.
pub fn z1_unit_check(
    spectrum: &EmpiricalSpectrum,
    x0: Complex64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let z = z1_eq56(spectrum, x0, x0, quad)?;
    Ok((z - Complex64::new(1.0, 0.0)).norm())
}

/// Large-n limit of Z_1(n x0, n x1): the product of (x1 - lambda_l)/(x0 - lambda_l).
pub fn clt_reference(lambdas: &[f64], x0: Complex64, x1: Complex64) -> Complex64 {
    lambdas
        .iter()
        .map(|&l| (x1 - l) / (x0 - l))
        .product()
}

/// Deviation |Z_1(n x0, n x1) - prod (x1 - l)/(x0 - l)| for each n in the
/// sequence, holding the eigenvalues fixed.
pub fn clt_limit_check(
    spectrum: &EmpiricalSpectrum,
    x0: Complex64,
    x1: Complex64,
    n_sequence: &[usize],
    quad: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let reference = clt_reference(spectrum.lambdas(), x0, x1);
    let mut out = Vec::with_capacity(n_sequence.len());
    for &n in n_sequence {
        let s = spectrum.with_n(n)?;
        let nf = n as f64;
        let z = z1_eq56(&s, x0 * nf, x1 * nf, quad)?;
        out.push((z - reference).norm());
    }
    Ok(out)
}
