//! Domain types shared by all density modules and validation of ensemble
//! parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WishartError};
use crate::numeric::{DEGENERACY_TOL, ERR_FLOOR};

/// Ensemble class: real (Dyson index 1) or complex (Dyson index 2) entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    Real,
    Complex,
}

impl Beta {
    pub fn index(self) -> u8 {
        match self {
            Beta::Real => 1,
            Beta::Complex => 2,
        }
    }
}

impl TryFrom<u8> for Beta {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Beta::Real),
            2 => Ok(Beta::Complex),
            other => Err(format!("beta must be 1 or 2, got {other}")),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        b.index()
    }
}

/// The given correlation eigenvalues with ensemble parameters.
///
/// Construction goes through [`validate_spectrum`], which sorts the
/// eigenvalues ascending and enforces positivity, distinctness and p <= n.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSpectrum {
    beta: Beta,
    n: usize,
    lambdas: Vec<f64>,
}

impl EmpiricalSpectrum {
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.lambdas.len()
    }

    /// Eigenvalues in strictly ascending order.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    /// Gate for the real-case density path, which needs convergent boundary
    /// terms in the regularized integrals.
    pub fn require_real_density(&self) -> Result<()> {
        if self.beta != Beta::Real {
            return Ok(());
        }
        if self.n <= self.p() + 3 {
            return Err(WishartError::RealCaseTooSmallN { n: self.n, p: self.p() });
        }
        Ok(())
    }

    /// Same eigenvalues, different series length. Used by the CLT check.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        validate_spectrum(self.beta, n, &self.lambdas)
    }

    /// Construction bypassing the degeneracy check, for sampling-only use in
    /// tests (the analytic formulas all divide by eigenvalue differences).
    #[doc(hidden)]
    pub fn new_unchecked(beta: Beta, n: usize, mut lambdas: Vec<f64>) -> Self {
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Self { beta, n, lambdas }
    }
}

/// Validates raw ensemble parameters and returns a normalized spectrum with
/// eigenvalues sorted ascending.
pub fn validate_spectrum(beta: Beta, n: usize, raw: &[f64]) -> Result<EmpiricalSpectrum> {
    if raw.is_empty() {
        return Err(WishartError::EmptySpectrum);
    }
    let mut lambdas = raw.to_vec();
    for &l in &lambdas {
        if !(l > 0.0) || !l.is_finite() {
            return Err(WishartError::NonPositiveEigenvalue(l));
        }
    }
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p = lambdas.len();
    if p > n {
        return Err(WishartError::DimensionError { p, n });
    }
    for w in lambdas.windows(2) {
        let gap = (w[1] - w[0]) / w[1];
        if gap < DEGENERACY_TOL {
            return Err(WishartError::DegenerateSpectrum {
                lo: w[0],
                hi: w[1],
                gap,
                tol: DEGENERACY_TOL,
            });
        }
    }
    Ok(EmpiricalSpectrum { beta, n, lambdas })
}

/// Complex shift x ± i*eps used when approaching the real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexShift {
    pub x: f64,
    pub eps: f64,
}

impl ComplexShift {
    pub fn new(x: f64, eps: f64) -> Self {
        assert!(eps > 0.0, "imaginary offset must be positive");
        Self { x, eps }
    }
}

/// Sampled density S_beta(x) on a grid with per-point absolute error
/// estimates.
#[derive(Debug, Clone, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl DensityCurve {
    /// Builds a curve from raw point evaluations, clamping tiny negative
    /// values from quadrature round-off to zero and folding the clamped
    /// amount into the error estimate.
    pub fn from_points(grid: Vec<f64>, raw: Vec<(f64, f64)>) -> Self {
        assert_eq!(grid.len(), raw.len());
        let mut values = Vec::with_capacity(raw.len());
        let mut errors = Vec::with_capacity(raw.len());
        for (i, &(v, e)) in raw.iter().enumerate() {
            if grid[i] < 0.0 {
                values.push(0.0);
                errors.push(0.0);
            } else if v < 0.0 && v >= -(e.max(ERR_FLOOR)) {
                values.push(0.0);
                errors.push(e.max(v.abs()));
            } else {
                values.push(v);
                errors.push(e);
            }
        }
        Self { grid, values, errors }
    }

    /// Trapezoid integral of the curve over its grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Trapezoid integral of x*S(x) over the grid.
    pub fn first_moment(&self) -> f64 {
        let xs: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| x * v)
            .collect();
        trapezoid(&self.grid, &xs)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = crate::numeric::CompensatedSum::new();
    for i in 1..x.len() {
        acc.add(0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]));
    }
    acc.value()
}
