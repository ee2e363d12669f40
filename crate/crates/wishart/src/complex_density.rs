//! Closed-form one-point function for the complex ensemble, in two
//! algebraically equivalent forms that cross-check each other.

use crate::error::{Result, WishartError};
use crate::exec;
use crate::numeric::{CompensatedSum, LnFactorial};
use crate::spectrum::{Beta, DensityCurve, EmpiricalSpectrum};
use crate::symfun::{elementary_symmetric, leave_out, SymTable};

/// Shared per-spectrum tables for repeated grid evaluation.
struct S2Context {
    n: usize,
    lambdas: Vec<f64>,
    /// E_k of each leave-one-out spectrum.
    sym_rest: Vec<SymTable>,
    /// prod_{l != j} (1 - lambda_l / lambda_j) per j.
    denom: Vec<f64>,
    lnfact: LnFactorial,
}

impl S2Context {
    fn new(spectrum: &EmpiricalSpectrum) -> Result<Self> {
        let lambdas = spectrum.lambdas().to_vec();
        let p = lambdas.len();
        let mut sym_rest = Vec::with_capacity(p);
        let mut denom = Vec::with_capacity(p);
        for j in 0..p {
            let rest = leave_out(&lambdas, j)?;
            sym_rest.push(elementary_symmetric(&rest));
            let mut d = 1.0;
            for (l, &lam) in lambdas.iter().enumerate() {
                if l != j {
                    d *= 1.0 - lam / lambdas[j];
                }
            }
            if d == 0.0 {
                return Err(WishartError::DegenerateSpectrum {
                    lo: lambdas[j],
                    hi: lambdas[j],
                    gap: 0.0,
                    tol: crate::numeric::DEGENERACY_TOL,
                });
            }
            denom.push(d);
        }
        Ok(Self { n: spectrum.n(), lambdas, sym_rest, denom, lnfact: LnFactorial::up_to(spectrum.n()) })
    }

    /// ln of x^(n-k)/(n-k)!, with the n == k corner handled so that x = 0
    /// stays well-defined.
    fn ln_power_term(&self, x: f64, k: usize) -> f64 {
        let m = self.n - k;
        if m == 0 {
            return 0.0;
        }
        if x == 0.0 {
            return f64::NEG_INFINITY;
        }
        m as f64 * x.ln() - self.lnfact.get(m)
    }

    fn residue_sum(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let p = self.lambdas.len();
        let mut total = CompensatedSum::new();
        for j in 0..p {
            let lam_j = self.lambdas[j];
            // exponent shared by every k-term of this residue; combining it
            // with the k-dependent part keeps each exp() in range even when
            // the pieces would overflow separately.
            let ln_pref = -x / lam_j - self.n as f64 * lam_j.ln();
            let mut inner = CompensatedSum::new();
            for k in 1..=p {
                let e = self.sym_rest[j].get_negated(k as isize - 1);
                if e == 0.0 {
                    continue;
                }
                let ln_term = self.ln_power_term(x, k) + ln_pref;
                inner.add(e * ln_term.exp());
            }
            total.add(inner.value() / self.denom[j]);
        }
        total.value() / p as f64
    }

    fn determinant_ratio(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let p = self.lambdas.len();
        let n = self.n;

        // Log-magnitude scaling of the first row (B) and first column (C)
        // keeps the matrix entries representable for large n.
        let ln_b: Vec<f64> =
            self.lambdas.iter().map(|&l| -x / l - n as f64 * l.ln()).collect();
        let ln_c: Vec<f64> = (1..=p).map(|k| self.ln_power_term(x, k)).collect();
        let b_scale = ln_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let c_scale = ln_c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !b_scale.is_finite() || !c_scale.is_finite() {
            // x = 0 with every power positive: the C column vanishes.
            if c_scale == f64::NEG_INFINITY {
                return 0.0;
            }
            return 0.0;
        }

        let dim = p + 1;
        let mut m = vec![0.0f64; dim * dim];
        for j in 0..p {
            m[j + 1] = (ln_b[j] - b_scale).exp();
        }
        for k in 1..=p {
            m[k * dim] = -(ln_c[k - 1] - c_scale).exp();
            for j in 0..p {
                m[k * dim + j + 1] = self.lambdas[j].powi(1 - k as i32);
            }
        }
        let (sign_m, ln_m) = lu_log_det(&mut m, dim);

        let mut d = vec![0.0f64; p * p];
        for k in 1..=p {
            for j in 0..p {
                d[(k - 1) * p + j] = self.lambdas[j].powi(1 - k as i32);
            }
        }
        let (sign_d, ln_d) = lu_log_det(&mut d, p);

        if sign_m == 0.0 {
            return 0.0;
        }
        sign_m * sign_d * (ln_m + b_scale + c_scale - ln_d).exp() / p as f64
    }
}

/// Determinant of a row-major square matrix by partial-pivot elimination,
/// returned as (sign, ln|det|). The matrix is destroyed.
fn lu_log_det(m: &mut [f64], dim: usize) -> (f64, f64) {
    let mut sign = 1.0;
    let mut ln_det = 0.0;
    for col in 0..dim {
        let mut piv = col;
        let mut best = m[col * dim + col].abs();
        for row in col + 1..dim {
            let v = m[row * dim + col].abs();
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if piv != col {
            for c in 0..dim {
                m.swap(col * dim + c, piv * dim + c);
            }
            sign = -sign;
        }
        let d = m[col * dim + col];
        sign *= d.signum();
        ln_det += d.abs().ln();
        for row in col + 1..dim {
            let factor = m[row * dim + col] / d;
            if factor != 0.0 {
                for c in col..dim {
                    m[row * dim + c] -= factor * m[col * dim + c];
                }
            }
        }
    }
    (sign, ln_det)
}

fn require_complex(spectrum: &EmpiricalSpectrum) -> Result<()> {
    if spectrum.beta() != Beta::Complex {
        return Err(WishartError::DomainError(
            "complex-case density requested for a beta = 1 spectrum".into(),
        ));
    }
    Ok(())
}

/// One-point function S_2(x) as the residue sum over the eigenvalues.
pub fn s2_residue_sum(spectrum: &EmpiricalSpectrum, x: f64) -> Result<f64> {
    require_complex(spectrum)?;
    Ok(S2Context::new(spectrum)?.residue_sum(x))
}

/// S_2(x) as the ratio of a bordered determinant to the inverse-power
/// Vandermonde determinant, evaluated by pivoted elimination.
pub fn s2_determinant_ratio(spectrum: &EmpiricalSpectrum, x: f64) -> Result<f64> {
    require_complex(spectrum)?;
    Ok(S2Context::new(spectrum)?.determinant_ratio(x))
}

/// Relative disagreement between the two forms above which a conditioning
/// warning is emitted.
pub const S2_CROSSCHECK_REL_TOL: f64 = 1e-8;

/// Pointwise residue-sum curve with the determinant form as per-point error
/// estimate.
pub fn s2_curve(spectrum: &EmpiricalSpectrum, grid: &[f64]) -> Result<DensityCurve> {
    require_complex(spectrum)?;
    for &x in grid {
        if !x.is_finite() {
            return Err(WishartError::DomainError(format!("non-finite grid point {x}")));
        }
    }
    let ctx = S2Context::new(spectrum)?;
    let pts = exec::map_indexed(grid.len(), |i| {
        let x = grid[i];
        let r = ctx.residue_sum(x);
        let d = ctx.determinant_ratio(x);
        (r, (r - d).abs())
    });
    let peak = pts.iter().map(|&(v, _)| v.abs()).fold(0.0, f64::max);
    let worst = pts.iter().map(|&(_, e)| e).fold(0.0, f64::max);
    if peak > 0.0 && worst / peak > S2_CROSSCHECK_REL_TOL {
        log::warn!(
            "residue and determinant forms disagree by {:.3e} of the peak; \
             eigenvalue ratios close to 1 degrade the residue sum",
            worst / peak
        );
    }
    Ok(DensityCurve::from_points(grid.to_vec(), pts))
}

/// Default integration cutoff for normalization checks of S_2.
pub fn s2_grid_upper(spectrum: &EmpiricalSpectrum) -> f64 {
    let n = spectrum.n() as f64;
    n * spectrum.lambda_max() + 10.0 * n.sqrt() * spectrum.lambda_max()
}
