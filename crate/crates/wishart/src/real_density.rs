//! One-point function of the real ensemble.
//!
//! Two routes are implemented. `z1_eq56` evaluates the generating function
//! Z_1(x0, x1) as a convergent double integral for x0 off the positive real
//! axis; `s1_epsilon_oracle` turns it into a density estimate by finite
//! differences at small imaginary offset. `s1_exact` evaluates the limit
//! directly: the discontinuity across the real axis survives only on cell
//! pairs with odd index sum, where the integrand is real apart from simple
//! poles at the cell boundaries; those combine with the square-root factors
//! into 3/2-power endpoint singularities that are regularized by the
//! partial-integration identity (boundary term plus differentiated
//! integrand). On each off-diagonal cell pair |r_a - r_b| is a plain
//! difference, so every cell-pair integral factorizes into products of 1D
//! moments, which is what makes the exact path fast.

use num_complex::Complex64;

use crate::error::{Result, WishartError};
use crate::exec;
use crate::numeric::{CompensatedSum, LnFactorial};
use crate::quadrature::{
    integrate_1d_multi, integrate_2d_cell, principal_value_window, QuadratureConfig,
};
use crate::spectrum::{Beta, DensityCurve, EmpiricalSpectrum};
use crate::symfun::{elementary_symmetric, leave_out, leave_out2};

// ------------------------------------------------------------------
// Cell partition
// ------------------------------------------------------------------

/// Ordered cell pair with odd index sum and its sign in the density sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddPair {
    pub l: usize,
    pub lp: usize,
    pub sign: f64,
}

/// Partition of the positive axis cut at the points x/lambda_j.
///
/// Cell 0 runs from 0 to x/lambda_max; cell c contains the points where
/// exactly c of the factors (x - lambda_i r) are negative; the last cell is
/// right-open (stored with infinity).
#[derive(Debug, Clone)]
pub struct CellPartition {
    pub x: f64,
    /// Ascending boundaries x/lambda_p < ... < x/lambda_1.
    pub boundaries: Vec<f64>,
    pub cells: Vec<(f64, f64)>,
    pub odd_pairs: Vec<OddPair>,
}

impl CellPartition {
    pub fn new(spectrum: &EmpiricalSpectrum, x: f64) -> Self {
        assert!(x > 0.0, "partition only defined for positive x");
        let lambdas = spectrum.lambdas();
        let p = lambdas.len();
        let boundaries: Vec<f64> = lambdas.iter().rev().map(|&l| x / l).collect();
        let mut cells = Vec::with_capacity(p + 1);
        cells.push((0.0, boundaries[0]));
        for i in 1..p {
            cells.push((boundaries[i - 1], boundaries[i]));
        }
        cells.push((boundaries[p - 1], f64::INFINITY));
        let mut odd_pairs = Vec::new();
        for l in 0..=p {
            for lp in 0..=p {
                let m = l + lp;
                if m % 2 == 1 {
                    let sign = if (m - 1) / 2 % 2 == 0 { 1.0 } else { -1.0 };
                    odd_pairs.push(OddPair { l, lp, sign });
                }
            }
        }
        Self { x, boundaries, cells, odd_pairs }
    }

    /// 0-based lambda index whose pole sits at ascending boundary `i`.
    pub fn pole_index(&self, i: usize) -> usize {
        self.boundaries.len() - 1 - i
    }
}

// ------------------------------------------------------------------
// k-sum coefficient tables shared by both routes
// ------------------------------------------------------------------

struct SigmaTables {
    s0: Complex64,
    s1: Vec<Complex64>,
    /// s2[j][m] for j != m; zero on the diagonal.
    s2: Vec<Vec<Complex64>>,
}

/// Contracts coefficients c_0..c_p against the elementary symmetric
/// functions of the full, leave-one-out and leave-two-out spectra.
fn sigma_tables(lambdas: &[f64], coeffs: &[Complex64]) -> SigmaTables {
    let p = lambdas.len();
    assert_eq!(coeffs.len(), p + 1);
    let full = elementary_symmetric(lambdas);
    let mut s0 = Complex64::new(0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate() {
        s0 += c * full.get(k as isize);
    }
    let mut s1 = Vec::with_capacity(p);
    for j in 0..p {
        let rest = elementary_symmetric(&leave_out(lambdas, j).unwrap());
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            acc += c * rest.get(k as isize - 1);
        }
        s1.push(acc);
    }
    let mut s2 = vec![vec![Complex64::new(0.0, 0.0); p]; p];
    for j in 0..p {
        for m in j + 1..p {
            let rest = elementary_symmetric(&leave_out2(lambdas, j, m).unwrap());
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &c) in coeffs.iter().enumerate().skip(2) {
                acc += c * rest.get(k as isize - 2);
            }
            s2[j][m] = acc;
            s2[m][j] = acc;
        }
    }
    SigmaTables { s0, s1, s2 }
}

/// ln-scale offset K such that r^((n-3)/2) e^{-r/2} e^{-K} stays of order
/// one near its peak; the matching factor e^{2K} is folded into the k-sum
/// coefficients so that neither side overflows for large n.
fn weight_log_scale(n: usize) -> f64 {
    if n > 3 {
        let a = 0.5 * (n as f64 - 3.0);
        a * ((n as f64 - 3.0).ln() - 1.0)
    } else {
        0.0
    }
}

/// Truncation radius beyond which the Gaussian weight is negligible
/// relative to its peak, extended by the position of the outermost cell
/// boundary or pole.
fn truncation_radius(n: usize, extent: f64) -> f64 {
    let nf = n as f64;
    let gamma_tail = (nf - 1.0) + 12.0 * (2.0 * (nf - 1.0)).sqrt() + 30.0;
    let log_rule = 2.0 * (nf + (nf).ln().max(1.0) * 8.0);
    gamma_tail.max(log_rule) + extent.max(0.0)
}

// ------------------------------------------------------------------
// Generating-function integrand and Z_1
// ------------------------------------------------------------------

/// Integrand of the Z_1 double integral at fixed (spectrum, x0, x1),
/// evaluable at any (r_a, r_b) in the open positive quadrant.
pub struct Eq56Integrand {
    n: usize,
    lambdas: Vec<f64>,
    x0: Complex64,
    sig: SigmaTables,
    coef_b1: Complex64,
    two_k: f64,
}

impl Eq56Integrand {
    pub fn new(spectrum: &EmpiricalSpectrum, x0: Complex64, x1: Complex64) -> Self {
        let n = spectrum.n();
        let p = spectrum.p();
        let lambdas = spectrum.lambdas().to_vec();
        let two_k = 2.0 * weight_log_scale(n);
        let lnf = LnFactorial::up_to(n);
        // c_k = (-1)^k x1^{p-k} / (n-k)!  scaled by e^{2K}
        let mut coeffs = Vec::with_capacity(p + 1);
        for k in 0..=p {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let mag = (two_k - lnf.get(n - k)).exp();
            coeffs.push(x1.powi((p - k) as i32) * sign * mag);
        }
        let sig = sigma_tables(&lambdas, &coeffs);
        let nf = n as f64;
        let coef_b1 = sig.s0 * nf * (nf - 1.0);
        Self { n, lambdas, x0, sig, coef_b1, two_k }
    }

    #[inline]
    fn phi(&self, j: usize, r: f64) -> Complex64 {
        r / (self.x0 - self.lambdas[j] * r)
    }

    /// Full integrand value: weight, bracket and the analytically-continued
    /// square-root product (principal branch per factor, which restricts to
    /// prod (x0 - lambda_i r) on the diagonal).
    pub fn eval(&self, ra: f64, rb: f64) -> Complex64 {
        if ra < 0.0 || rb < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.n;
        let mut wq = -0.5 * (ra + rb) - self.two_k;
        if n != 3 {
            if ra == 0.0 || rb == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            wq += 0.5 * (n as f64 - 3.0) * (ra.ln() + rb.ln());
        }
        let weight = (ra - rb).abs() * wq.exp();
        if weight == 0.0 {
            return Complex64::new(0.0, 0.0);
        }

        let p = self.lambdas.len();
        let nf = n as f64;
        let mut bracket = self.coef_b1;
        let mut phia = Vec::with_capacity(p);
        let mut phib = Vec::with_capacity(p);
        for j in 0..p {
            phia.push(self.phi(j, ra));
            phib.push(self.phi(j, rb));
        }
        for j in 0..p {
            let lj2 = self.lambdas[j] * self.lambdas[j];
            bracket += self.sig.s1[j] * ((nf - 1.0) * lj2) * (phia[j] + phib[j]);
        }
        for j in 0..p {
            let lj2 = self.lambdas[j] * self.lambdas[j];
            for m in 0..p {
                if m == j {
                    continue;
                }
                let lm2 = self.lambdas[m] * self.lambdas[m];
                bracket += self.sig.s2[j][m] * (lj2 * lm2) * (phia[j] * phib[m]);
            }
        }

        let mut root = Complex64::new(1.0, 0.0);
        for &lam in &self.lambdas {
            root *= (self.x0 - lam * ra).sqrt() * (self.x0 - lam * rb).sqrt();
        }
        weight * bracket / root
    }

    /// The square-root product alone; on the diagonal it collapses to the
    /// plain product of the factors.
    pub fn root_product(&self, ra: f64, rb: f64) -> Complex64 {
        let mut root = Complex64::new(1.0, 0.0);
        for &lam in &self.lambdas {
            root *= (self.x0 - lam * ra).sqrt() * (self.x0 - lam * rb).sqrt();
        }
        root
    }
}

fn check_off_positive_axis(x0: Complex64) -> Result<()> {
    if x0.im == 0.0 && x0.re >= 0.0 {
        return Err(WishartError::DomainError(format!("{x0}")));
    }
    Ok(())
}

/// Generating function Z_1(x0, x1) as the convergent double integral over
/// the positive quadrant. Requires n >= 3 and x0 off the closed positive
/// real axis.
pub fn z1_eq56(
    spectrum: &EmpiricalSpectrum,
    x0: Complex64,
    x1: Complex64,
    quad: &QuadratureConfig,
) -> Result<Complex64> {
    check_off_positive_axis(x0)?;
    if spectrum.n() < 3 {
        return Err(WishartError::DomainError(format!(
            "generating-function integral needs n >= 3, got n = {}",
            spectrum.n()
        )));
    }
    let integrand = Eq56Integrand::new(spectrum, x0, x1);
    let extent = x0.re.max(0.0) / spectrum.lambda_min();
    let rmax = truncation_radius(spectrum.n(), extent);

    // The integrand is symmetric under swap of (r_a, r_b); integrate twice
    // the lower triangle r_a <= r_b, mapped to a rectangle by
    // r_a = tau^2 r_b (the tau substitution also removes the half-power of
    // the weight at r_a = 0 for even n).
    let g = |tau: f64, rb: f64| integrand.eval(tau * tau * rb, rb) * (2.0 * tau * rb);
    let res = integrate_2d_cell(g, (0.0, 1.0), (0.0, rmax), false, quad)?;
    Ok(res.value * 0.25)
}

// ------------------------------------------------------------------
// Epsilon-limit oracle
// ------------------------------------------------------------------

/// Density estimate straight from the generating function at a small
/// imaginary offset: the two-sided discontinuity reduces by conjugation
/// symmetry to -(1/(pi p)) d/dx1 Im Z_1(x + i eps, x1) at x1 = x, with the
/// x1-derivative taken by central differences of step h.
pub fn s1_epsilon_oracle(
    spectrum: &EmpiricalSpectrum,
    x: f64,
    eps: f64,
    h: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    assert!(eps > 0.0 && h > 0.0);
    spectrum.require_real_density()?;
    let x0 = Complex64::new(x, eps);
    let zp = z1_eq56(spectrum, x0, Complex64::new(x + h, 0.0), quad)?;
    let zm = z1_eq56(spectrum, x0, Complex64::new(x - h, 0.0), quad)?;
    let deriv = (zp.im - zm.im) / (2.0 * h);
    Ok(-deriv / (std::f64::consts::PI * spectrum.p() as f64))
}

/// Offsets used by the extrapolated oracle.
pub const ORACLE_EPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Eliminates the leading eps^(1/2) and eps terms from oracle values at the
/// three offsets of [`ORACLE_EPS`] and returns the extrapolated limit.
pub fn extrapolate_eps_limit(points: &[(f64, f64)]) -> f64 {
    assert_eq!(points.len(), 3);
    // Solve [1 sqrt(e) e] [a; b; c] = v for a.
    let mut m = [[0.0f64; 4]; 3];
    for (row, &(e, v)) in points.iter().enumerate() {
        m[row][0] = 1.0;
        m[row][1] = e.sqrt();
        m[row][2] = e;
        m[row][3] = v;
    }
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for c in col..4 {
                    m[row][c] -= f * m[col][c];
                }
            }
        }
    }
    m[0][3] / m[0][0]
}

/// Oracle with the eps -> 0 limit taken by extrapolation over three
/// descending offsets.
pub fn s1_epsilon_extrapolated(
    spectrum: &EmpiricalSpectrum,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let h = 1e-3 * x.abs().max(1.0);
    let mut pts = Vec::with_capacity(ORACLE_EPS.len());
    for &eps in &ORACLE_EPS {
        pts.push((eps, s1_epsilon_oracle(spectrum, x, eps, h, quad)?));
    }
    Ok(extrapolate_eps_limit(&pts))
}

// ------------------------------------------------------------------
// Exact density via cell moments
// ------------------------------------------------------------------

/// Value with a propagated absolute error estimate.
#[derive(Debug, Clone, Copy, Default)]
struct Est {
    v: f64,
    e: f64,
}

impl Est {
    fn mul(self, other: Est) -> Est {
        Est { v: self.v * other.v, e: self.v.abs() * other.e + other.v.abs() * self.e }
    }
}

/// Per-cell singular moments of the shared weight u(r) = w(r)/pi(r):
/// mu[q] = int r^q u, and a[j][q] = int r^q u * r/(x - lambda_j r) with the
/// finite-part prescription when the pole coincides with a cell endpoint.
struct CellMoments {
    /// layout: [mu0, mu1, a_0^0, a_0^1, ..., a_{p-1}^0, a_{p-1}^1]
    m: Vec<Est>,
}

const MU0: usize = 0;
const MU1: usize = 1;
fn a_slot(j: usize, q: usize) -> usize {
    2 + 2 * j + q
}

struct S1Evaluator<'a> {
    spectrum: &'a EmpiricalSpectrum,
    x: f64,
    part: CellPartition,
    /// n(n-1) sigma0
    coef_b1: f64,
    /// (n-1) lambda_j^2 sigma1[j]
    coef_b3: Vec<f64>,
    /// lambda_j^2 lambda_m^2 sigma2[j][m]
    coef_b2: Vec<Vec<f64>>,
    two_k: f64,
    rmax: f64,
}

impl<'a> S1Evaluator<'a> {
    fn new(spectrum: &'a EmpiricalSpectrum, x: f64) -> Self {
        let n = spectrum.n();
        let p = spectrum.p();
        let lambdas = spectrum.lambdas();
        let part = CellPartition::new(spectrum, x);
        let two_k = 2.0 * weight_log_scale(n);
        let lnf = LnFactorial::up_to(n);

        // d/dx1 of the k-sum at x1 = x:
        // c_k = (-1)^k (p-k) x^{p-k-1} / (n-k)!  scaled by e^{2K}
        let mut coeffs = Vec::with_capacity(p + 1);
        for k in 0..=p {
            if k == p {
                coeffs.push(Complex64::new(0.0, 0.0));
                continue;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let ln_mag = (p - k - 1) as f64 * x.ln() - lnf.get(n - k) + two_k;
            coeffs.push(Complex64::new(sign * (p - k) as f64 * ln_mag.exp(), 0.0));
        }
        let sig = sigma_tables(lambdas, &coeffs);
        let nf = n as f64;
        let coef_b1 = nf * (nf - 1.0) * sig.s0.re;
        let coef_b3: Vec<f64> = (0..p)
            .map(|j| (nf - 1.0) * lambdas[j] * lambdas[j] * sig.s1[j].re)
            .collect();
        let coef_b2: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                (0..p)
                    .map(|m| {
                        lambdas[j] * lambdas[j] * lambdas[m] * lambdas[m] * sig.s2[j][m].re
                    })
                    .collect()
            })
            .collect();
        let rmax = truncation_radius(n, x / spectrum.lambda_min());
        Self { spectrum, x, part, coef_b1, coef_b3, coef_b2, two_k, rmax }
    }

    /// ln of the scaled weight r^((n-3)/2) e^{-r/2} e^{-K}.
    #[inline]
    fn ln_weight(&self, r: f64) -> f64 {
        let n = self.spectrum.n();
        let mut q = -0.5 * r - 0.5 * self.two_k;
        if n != 3 {
            q += 0.5 * (n as f64 - 3.0) * r.ln();
        }
        q
    }

    /// Square-root product of |x - lambda_i r| over all i except `skip`.
    #[inline]
    fn pi_abs(&self, r: f64, skip: Option<usize>) -> f64 {
        let mut acc = 1.0;
        for (i, &lam) in self.spectrum.lambdas().iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            acc *= (self.x - lam * r).abs().sqrt();
        }
        acc
    }

    /// Finite-part window half-width at boundary index `i` per the
    /// min(0.4 * gap, 0.1 * b) rule.
    fn window_delta(&self, i: usize) -> f64 {
        let b = self.part.boundaries[i];
        let lower_gap = if i == 0 { b } else { b - self.part.boundaries[i - 1] };
        let upper_gap = if i + 1 < self.part.boundaries.len() {
            self.part.boundaries[i + 1] - b
        } else {
            self.rmax - b
        };
        (0.4 * lower_gap.min(upper_gap)).min(0.1 * b)
    }

    /// All singular moments of one cell.
    fn cell_moments(&self, c: usize, quad: &QuadratureConfig) -> Result<CellMoments> {
        let p = self.spectrum.p();
        let dim = 2 + 2 * p;
        let x = self.x;
        let lambdas = self.spectrum.lambdas();
        let (lo, hi_raw) = self.part.cells[c];
        let hi = if hi_raw.is_finite() { hi_raw } else { self.rmax };

        // pole indices at the endpoints, if any
        let pole_lo = if c > 0 { Some(self.part.pole_index(c - 1)) } else { None };
        let pole_hi = if c < p { Some(self.part.pole_index(c)) } else { None };
        let delta_lo = pole_lo.map(|_| self.window_delta(c - 1)).unwrap_or(0.0);
        let delta_hi = pole_hi.map(|_| self.window_delta(c)).unwrap_or(0.0);

        let fill = |r: f64, out: &mut [f64]| {
            let u = self.ln_weight(r).exp() / self.pi_abs(r, None);
            out[MU0] = u;
            out[MU1] = r * u;
            for j in 0..p {
                let phi = r / (x - lambdas[j] * r);
                out[a_slot(j, 0)] = phi * u;
                out[a_slot(j, 1)] = r * phi * u;
            }
        };

        // segment list: finite-part windows are cut out of the cell and the
        // affected components are replaced there by the regularized value
        struct Seg {
            range: (f64, f64),
            flags: (bool, bool),
            skip: Option<usize>,
        }
        let mut segs: Vec<Seg> = Vec::new();
        let mut body_lo = lo;
        let mut body_hi = hi;
        let mut body_flag_lo = pole_lo.is_some();
        let mut body_flag_hi = pole_hi.is_some();
        if c == 0 && self.spectrum.n() % 2 == 0 {
            // half-integer weight power at r = 0
            body_flag_lo = true;
        }
        if let Some(j) = pole_lo {
            segs.push(Seg { range: (lo, lo + delta_lo), flags: (true, false), skip: Some(j) });
            body_lo = lo + delta_lo;
            body_flag_lo = false;
        }
        if let Some(j) = pole_hi {
            segs.push(Seg { range: (hi - delta_hi, hi), flags: (false, true), skip: Some(j) });
            body_hi = hi - delta_hi;
            body_flag_hi = false;
        }
        segs.push(Seg { range: (body_lo, body_hi), flags: (body_flag_lo, body_flag_hi), skip: None });

        let mut m = vec![Est::default(); dim];
        for seg in &segs {
            let mut control = vec![true; dim];
            if let Some(j) = seg.skip {
                control[a_slot(j, 0)] = false;
                control[a_slot(j, 1)] = false;
            }
            let res = integrate_1d_multi(&fill, dim, seg.range, seg.flags, &control, quad);
            for d in 0..dim {
                let skipped = seg.skip.map(|j| d == a_slot(j, 0) || d == a_slot(j, 1));
                if skipped == Some(true) {
                    continue;
                }
                m[d].v += res.values[d];
                m[d].e += res.errs[d];
            }
        }

        // finite-part contributions for the pole components on their windows
        if let Some(j) = pole_lo {
            self.add_finite_part(&mut m, j, lo, delta_lo, Side::Right, quad)?;
        }
        if let Some(j) = pole_hi {
            self.add_finite_part(&mut m, j, hi, delta_hi, Side::Left, quad)?;
        }
        Ok(CellMoments { m })
    }

    fn add_finite_part(
        &self,
        m: &mut [Est],
        j: usize,
        boundary: f64,
        delta: f64,
        side: Side,
        quad: &QuadratureConfig,
    ) -> Result<()> {
        let lam = self.spectrum.lambdas()[j];
        // r^{q+1} w(r) / pi_rest(r), smooth across the boundary
        for q in 0..2usize {
            let psi = |r: f64| {
                r.powi(q as i32 + 1) * self.ln_weight(r).exp() / self.pi_abs(r, Some(j))
            };
            // Mirror the window for a left-side cell so the finite part is
            // always taken into the positive local coordinate.
            let g = |r: f64| match side {
                Side::Right => psi(r),
                Side::Left => psi(2.0 * boundary - r),
            };
            let pv = principal_value_window(g, boundary, delta, delta, quad)?;
            let fp = 2.0 * pv.value.re;
            let scale = lam.powf(-1.5);
            let signed = match side {
                // cell right of the pole: x - lambda r < 0 there
                Side::Right => -scale * fp,
                Side::Left => scale * fp,
            };
            m[a_slot(j, q)].v += signed;
            m[a_slot(j, q)].e += 2.0 * scale * pv.err_estimate;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Side {
    /// Cell lies right of the pole (pole at the cell's lower endpoint).
    Right,
    /// Cell lies left of the pole.
    Left,
}

/// Exact real-case density at one point, with the propagated quadrature
/// error estimate.
pub fn s1_point(
    spectrum: &EmpiricalSpectrum,
    x: f64,
    quad: &QuadratureConfig,
) -> Result<(f64, f64)> {
    if spectrum.beta() != Beta::Real {
        return Err(WishartError::DomainError(
            "real-case density requested for a beta = 2 spectrum".into(),
        ));
    }
    spectrum.require_real_density()?;
    if x <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let ev = S1Evaluator::new(spectrum, x);
    let p = spectrum.p();

    let cells: Vec<Result<CellMoments>> =
        exec::map_indexed(p + 1, |c| ev.cell_moments(c, quad));
    let mut moments = Vec::with_capacity(p + 1);
    for c in cells {
        moments.push(c?);
    }

    let mut total = CompensatedSum::new();
    let mut err = 0.0;
    for pair in &ev.part.odd_pairs {
        let (a, b) = (&moments[pair.l].m, &moments[pair.lp].m);
        let orient = if pair.lp > pair.l { 1.0 } else { -1.0 };
        let s = pair.sign * orient;

        // antisymmetrized product A(r_a) B(r_b) (r_b - r_a)
        let cross = |ia: usize, ib: usize| -> Est {
            let hi = a[ia].mul(b[ib + 1]);
            let lo = a[ia + 1].mul(b[ib]);
            Est { v: hi.v - lo.v, e: hi.e + lo.e }
        };

        let mut pair_acc = CompensatedSum::new();
        let mut pair_err = 0.0;

        let t = cross(MU0, MU0);
        pair_acc.add(ev.coef_b1 * t.v);
        pair_err += ev.coef_b1.abs() * t.e;

        for j in 0..p {
            let ta = cross(a_slot(j, 0), MU0);
            let tb = cross(MU0, a_slot(j, 0));
            pair_acc.add(ev.coef_b3[j] * (ta.v + tb.v));
            pair_err += ev.coef_b3[j].abs() * (ta.e + tb.e);
        }

        for j in 0..p {
            for mm in 0..p {
                if mm == j {
                    continue;
                }
                let t = cross(a_slot(j, 0), a_slot(mm, 0));
                pair_acc.add(ev.coef_b2[j][mm] * t.v);
                pair_err += ev.coef_b2[j][mm].abs() * t.e;
            }
        }

        total.add(s * pair_acc.value());
        err += pair_err;
    }

    let norm = 1.0 / (8.0 * std::f64::consts::PI * p as f64);
    Ok((norm * total.value(), norm * err))
}

/// Exact real-case density at one point.
pub fn s1_exact(spectrum: &EmpiricalSpectrum, x: f64, quad: &QuadratureConfig) -> Result<f64> {
    s1_point(spectrum, x, quad).map(|(v, _)| v)
}

/// Pointwise exact curve with per-point quadrature error estimates.
pub fn s1_curve(
    spectrum: &EmpiricalSpectrum,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<DensityCurve> {
    spectrum.require_real_density()?;
    let pts: Vec<Result<(f64, f64)>> =
        exec::map_indexed(grid.len(), |i| s1_point(spectrum, grid[i], quad));
    let mut raw = Vec::with_capacity(pts.len());
    for r in pts {
        raw.push(r?);
    }
    Ok(DensityCurve::from_points(grid.to_vec(), raw))
}
