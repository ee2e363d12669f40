//! Elementary symmetric functions, leave-out spectra, Vandermonde products
//! and the truncated exponential product g(x;s) — the shared algebraic
//! kernel of both density formulas.

use num_complex::Complex64;

use crate::error::{Result, WishartError};
use crate::numeric::CompensatedSumC;

/// Table of elementary symmetric functions E_0..E_p of a spectrum.
///
/// Queries outside 0..=p return 0, matching the convention that E_k vanishes
/// for k < 0 and k > p.
#[derive(Debug, Clone)]
pub struct SymTable {
    e: Vec<f64>,
}

impl SymTable {
    pub fn p(&self) -> usize {
        self.e.len() - 1
    }

    /// E_k for signed k; zero outside the valid range.
    #[inline]
    pub fn get(&self, k: isize) -> f64 {
        if k < 0 || k as usize >= self.e.len() {
            0.0
        } else {
            self.e[k as usize]
        }
    }

    /// E_k of the negated spectrum, i.e. (-1)^k E_k.
    #[inline]
    pub fn get_negated(&self, k: isize) -> f64 {
        let v = self.get(k);
        if k % 2 == 0 {
            v
        } else {
            -v
        }
    }
}

/// Computes E_0..E_p by the incremental product recurrence
/// E_k^(m) = E_k^(m-1) + lambda_m * E_{k-1}^(m-1), which involves no
/// subtractions and is stable for positive spectra.
pub fn elementary_symmetric(values: &[f64]) -> SymTable {
    let p = values.len();
    let mut e = vec![0.0; p + 1];
    e[0] = 1.0;
    for (m, &lam) in values.iter().enumerate() {
        for k in (1..=m + 1).rev() {
            e[k] += lam * e[k - 1];
        }
    }
    SymTable { e }
}

/// Spectrum with the eigenvalue at `j` (0-based) removed, order preserved.
pub fn leave_out(values: &[f64], j: usize) -> Result<Vec<f64>> {
    if j >= values.len() {
        return Err(WishartError::IndexError { index: j, len: values.len() });
    }
    let mut out = Vec::with_capacity(values.len() - 1);
    out.extend_from_slice(&values[..j]);
    out.extend_from_slice(&values[j + 1..]);
    Ok(out)
}

/// Spectrum with the eigenvalues at distinct indices `j` and `l` removed.
pub fn leave_out2(values: &[f64], j: usize, l: usize) -> Result<Vec<f64>> {
    let len = values.len();
    if j >= len {
        return Err(WishartError::IndexError { index: j, len });
    }
    if l >= len || l == j {
        return Err(WishartError::IndexError { index: l, len });
    }
    let (a, b) = if j < l { (j, l) } else { (l, j) };
    let mut out = Vec::with_capacity(len - 2);
    out.extend_from_slice(&values[..a]);
    out.extend_from_slice(&values[a + 1..b]);
    out.extend_from_slice(&values[b + 1..]);
    Ok(out)
}

/// g(x;s) = exp(-i x s) * prod_j (1 + i s lambda_j).
pub fn g_lambda(values: &[f64], x: f64, s: Complex64) -> Complex64 {
    let i = Complex64::i();
    let mut prod = (-i * x * s).exp();
    for &lam in values {
        prod *= Complex64::new(1.0, 0.0) + i * s * lam;
    }
    prod
}

/// The first n Taylor coefficients in s of g(x;s), plus evaluation of the
/// truncated polynomial g^[<n] and its tail g^[>=n] = g - g^[<n].
#[derive(Debug, Clone)]
pub struct TruncatedExponentialProduct {
    pub x: f64,
    lambdas: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl TruncatedExponentialProduct {
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Degree-(n-1) Taylor polynomial of g at the point s, summed with a
    /// compensated accumulator; the coefficients alternate in phase and the
    /// partial sums can exceed the result by many orders for large |s|.
    pub fn truncated(&self, s: Complex64) -> Complex64 {
        let mut acc = CompensatedSumC::new();
        let mut power = Complex64::new(1.0, 0.0);
        for &c in &self.coeffs {
            acc.add(c * power);
            power *= s;
        }
        acc.value()
    }

    /// Tail g^[>=n](x;s) evaluated as g - g^[<n].
    pub fn tail(&self, s: Complex64) -> Complex64 {
        g_lambda(&self.lambdas, self.x, s) - self.truncated(s)
    }
}

/// Taylor coefficients of g(x;s) in s up to order n-1: the product
/// series sum_k (i s)^k E_k convolved with exp(-i x s).
pub fn g_taylor_coeffs(values: &[f64], x: f64, n: usize) -> TruncatedExponentialProduct {
    assert!(n >= 1, "at least one coefficient required");
    let i = Complex64::i();
    let sym = elementary_symmetric(values);
    let p = values.len();

    // a_k = i^k E_k, k = 0..=p
    let mut poly = Vec::with_capacity(p + 1);
    let mut ipow = Complex64::new(1.0, 0.0);
    for k in 0..=p {
        poly.push(ipow * sym.get(k as isize));
        ipow *= i;
    }

    // b_m = (-i x)^m / m!
    let mut expc = Vec::with_capacity(n);
    let mut b = Complex64::new(1.0, 0.0);
    expc.push(b);
    for m in 1..n {
        b *= -i * x / m as f64;
        expc.push(b);
    }

    let mut coeffs = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = CompensatedSumC::new();
        for (k, &a) in poly.iter().enumerate().take(t.min(p) + 1) {
            acc.add(a * expc[t - k]);
        }
        coeffs.push(acc.value());
    }
    TruncatedExponentialProduct { x, lambdas: values.to_vec(), coeffs }
}

/// Determinant of the matrix with entries lambda_j^(-k+1), which equals
/// prod_{j > j'} (1/lambda_j - 1/lambda_j').
pub fn vandermonde_det(values: &[f64]) -> Result<f64> {
    for w in values.windows(2) {
        if w[0] == w[1] {
            return Err(WishartError::DegenerateSpectrum {
                lo: w[0],
                hi: w[1],
                gap: 0.0,
                tol: crate::numeric::DEGENERACY_TOL,
            });
        }
    }
    let inv: Vec<f64> = values.iter().map(|l| 1.0 / l).collect();
    let mut det = 1.0;
    for j in 1..inv.len() {
        for jp in 0..j {
            det *= inv[j] - inv[jp];
        }
    }
    Ok(det)
}

/// Ratio of the (k,j)-minor of the inverse-power Vandermonde matrix to the
/// full determinant, via the symmetric-function identity
/// det D^(kj) / det D = (-1)^(j-1) E_{k-1}(leave-out j) / prod_{l!=j}(1 - lambda_l/lambda_j).
/// Indices k, j are 1-based like the matrix rows/columns.
pub fn minor_ratio(values: &[f64], k: usize, j: usize) -> Result<f64> {
    let p = values.len();
    if k == 0 || k > p {
        return Err(WishartError::IndexError { index: k, len: p });
    }
    if j == 0 || j > p {
        return Err(WishartError::IndexError { index: j, len: p });
    }
    let rest = leave_out(values, j - 1)?;
    let sym = elementary_symmetric(&rest);
    let lam_j = values[j - 1];
    let mut denom = 1.0;
    for (l, &lam) in values.iter().enumerate() {
        if l != j - 1 {
            denom *= 1.0 - lam / lam_j;
        }
    }
    let sign = if (j - 1) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * sym.get(k as isize - 1) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_product_has_unit_e0() {
        let t = elementary_symmetric(&[]);
        assert_eq!(t.get(0), 1.0);
        assert_eq!(t.get(1), 0.0);
    }

    #[test]
    fn direct_expansion_two_values() {
        let t = elementary_symmetric(&[2.0, 3.0]);
        assert_eq!(t.get(0), 1.0);
        assert_eq!(t.get(1), 5.0);
        assert_eq!(t.get(2), 6.0);
        assert_eq!(t.get(-1), 0.0);
        assert_eq!(t.get(3), 0.0);
    }

    #[test]
    fn leave_out_drops_requested_entries() {
        assert_eq!(leave_out(&[1.0, 2.0, 3.0], 1).unwrap(), vec![1.0, 3.0]);
        assert_eq!(leave_out2(&[1.0, 2.0, 3.0], 0, 2).unwrap(), vec![2.0]);
        assert!(leave_out(&[1.0], 1).is_err());
        assert!(leave_out2(&[1.0, 2.0], 0, 0).is_err());
    }

    #[test]
    fn leave_out_composes_with_symmetric_functions() {
        let lam = [0.5, 1.5, 2.5, 4.0];
        for j in 0..lam.len() {
            let rest = leave_out(&lam, j).unwrap();
            let sym = elementary_symmetric(&rest);
            // E_1 of the reduced set is the sum without lambda_j.
            let expect: f64 = lam.iter().sum::<f64>() - lam[j];
            assert_relative_eq!(sym.get(1), expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn g_lambda_special_points() {
        let lam = [0.5, 2.0];
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(g_lambda(&lam, 3.0, zero), Complex64::new(1.0, 0.0));
        // s = i/lambda_j annihilates the j-th factor
        let s = Complex64::new(0.0, 1.0 / 2.0);
        assert!(g_lambda(&lam, 1.0, s).norm() < 1e-15);
        // empty product leaves the exponential
        let s = Complex64::new(0.7, -0.3);
        let g = g_lambda(&[], 2.0, s);
        let expect = (-Complex64::i() * 2.0 * s).exp();
        assert!((g - expect).norm() < 1e-15);
    }

    #[test]
    fn taylor_low_order_coefficients() {
        let lam = [0.5, 2.0];
        let x = 1.3;
        let t = g_taylor_coeffs(&lam, x, 4);
        assert_eq!(t.coeffs()[0], Complex64::new(1.0, 0.0));
        // coeff 1 = i E_1 - i x
        let expect = Complex64::i() * (2.5 - x);
        assert!((t.coeffs()[1] - expect).norm() < 1e-15);
    }

    #[test]
    fn taylor_split_reconstructs_g() {
        let lam = [0.3, 1.0, 2.2];
        let x = 0.8;
        let t = g_taylor_coeffs(&lam, x, 7);
        for &s in &[
            Complex64::new(0.4, 0.1),
            Complex64::new(-1.0, 0.5),
            Complex64::new(0.0, 1.0),
        ] {
            let whole = g_lambda(&lam, x, s);
            let sum = t.truncated(s) + t.tail(s);
            assert!((whole - sum).norm() <= 1e-12 * whole.norm().max(1.0));
        }
    }

    #[test]
    fn taylor_matches_series_of_g_at_small_s() {
        // A degree-(n-1) polynomial is recovered from n samples of g on a
        // small circle by the discrete Fourier inversion of the series.
        let lam = [0.7, 1.9];
        let x = 1.1;
        let n = 8;
        let t = g_taylor_coeffs(&lam, x, n);
        let radius = 0.05;
        let m = 64usize;
        for k in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for q in 0..m {
                let ang = 2.0 * std::f64::consts::PI * q as f64 / m as f64;
                let s = Complex64::from_polar(radius, ang);
                acc += g_lambda(&lam, x, s) * Complex64::from_polar(1.0, -(k as f64) * ang);
            }
            let est = acc / m as f64 / radius.powi(k as i32);
            assert!(
                (est - t.coeffs()[k]).norm() <= 1e-12 * t.coeffs()[k].norm().max(1.0),
                "coefficient {k}: {est} vs {:?}",
                t.coeffs()[k]
            );
        }
    }

    #[test]
    fn vandermonde_small_cases() {
        assert_eq!(vandermonde_det(&[3.0]).unwrap(), 1.0);
        assert_relative_eq!(vandermonde_det(&[1.0, 2.0]).unwrap(), -0.5);
    }

    /// Cofactor-expansion determinant, the brute-force oracle for the
    /// Vandermonde product and the minor-ratio identity.
    fn det_cofactor(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 0 {
            return 1.0;
        }
        if n == 1 {
            return m[0][0];
        }
        let mut det = 0.0;
        for j in 0..n {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            det += sign * m[0][j] * det_cofactor(&minor);
        }
        det
    }

    fn d_matrix(lam: &[f64]) -> Vec<Vec<f64>> {
        let p = lam.len();
        (1..=p)
            .map(|k| lam.iter().map(|l| l.powi(1 - k as i32)).collect())
            .collect()
    }

    #[test]
    fn vandermonde_matches_cofactor_oracle() {
        let spectra: Vec<Vec<f64>> = vec![
            vec![0.5, 1.0],
            vec![0.3, 0.9, 2.0],
            vec![0.2, 0.6, 1.3, 2.9],
            vec![0.1, 0.4, 0.9, 1.7, 3.1],
        ];
        for lam in spectra {
            let oracle = det_cofactor(&d_matrix(&lam));
            let fast = vandermonde_det(&lam).unwrap();
            assert_relative_eq!(fast, oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn minor_ratio_matches_cofactor_oracle() {
        // Deterministically perturbed spectra up to p = 6.
        for p in 2..=6usize {
            let lam: Vec<f64> = (0..p)
                .map(|i| 0.4 + 0.7 * i as f64 + 0.05 * ((i * i) as f64).sin())
                .collect();
            let full = det_cofactor(&d_matrix(&lam));
            for k in 1..=p {
                for j in 1..=p {
                    let mat = d_matrix(&lam);
                    let minor: Vec<Vec<f64>> = mat
                        .iter()
                        .enumerate()
                        .filter(|&(r, _)| r != k - 1)
                        .map(|(_, row)| {
                            row.iter()
                                .enumerate()
                                .filter(|&(c, _)| c != j - 1)
                                .map(|(_, &v)| v)
                                .collect()
                        })
                        .collect();
                    let oracle = det_cofactor(&minor) / full;
                    let ident = minor_ratio(&lam, k, j).unwrap();
                    assert_relative_eq!(ident, oracle, max_relative = 1e-10);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn generating_function_identity(
            lam in proptest::collection::vec(0.05f64..5.0, 1..=8),
            t in -2.0f64..2.0,
        ) {
            let sym = elementary_symmetric(&lam);
            let mut lhs = 0.0;
            let mut tp = 1.0;
            for k in 0..=lam.len() {
                lhs += sym.get(k as isize) * tp;
                tp *= t;
            }
            let rhs: f64 = lam.iter().map(|&l| 1.0 + t * l).product();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn sorting_invariance_of_symmetric_functions(
            mut lam in proptest::collection::vec(0.05f64..5.0, 2..=6),
        ) {
            let a = elementary_symmetric(&lam);
            lam.reverse();
            let b = elementary_symmetric(&lam);
            for k in 0..=lam.len() {
                prop_assert!((a.get(k as isize) - b.get(k as isize)).abs()
                    <= 1e-12 * a.get(k as isize).abs().max(1.0));
            }
        }
    }
}
