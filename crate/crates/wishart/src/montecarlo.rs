//! Stochastic oracle: samples the Gaussian data matrix, diagonalizes the
//! Wishart matrix and builds eigenvalue histograms with Poisson error bands.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, WishartError};
use crate::exec;
use crate::spectrum::{Beta, EmpiricalSpectrum};

/// Seed plus substream rule: the sample index selects an independent
/// ChaCha stream, so parallel sampling is reproducible by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSeed {
    pub seed: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, sample_index: u64) -> NormalSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample_index);
        NormalSource { rng, spare: None }
    }
}

/// Standard normals via Box-Muller with deterministic pairing: each draw of
/// two uniforms yields two normals consumed in order.
struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    fn uniform(&mut self) -> f64 {
        // 53-bit uniform in [0, 1)
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform(); // (0, 1], keeps the log finite
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Row-major p x n data matrix; complex entries are stored as (re, im).
#[derive(Debug, Clone)]
pub enum DataMatrix {
    Real { p: usize, n: usize, data: Vec<f64> },
    Complex { p: usize, n: usize, data: Vec<(f64, f64)> },
}

/// Draws one data matrix: row j has entries of variance lambda_j (real
/// case) or expected squared modulus lambda_j (complex case), matching the
/// Gaussian weight exp(-(beta/2) tr W^dag Lambda^{-1} W).
pub fn sample_w(spectrum: &EmpiricalSpectrum, seed: RngSeed, sample_index: u64) -> DataMatrix {
    let p = spectrum.p();
    let n = spectrum.n();
    let mut src = seed.stream(sample_index);
    match spectrum.beta() {
        Beta::Real => {
            let mut data = Vec::with_capacity(p * n);
            for &lam in spectrum.lambdas() {
                let sd = lam.sqrt();
                for _ in 0..n {
                    data.push(sd * src.next());
                }
            }
            DataMatrix::Real { p, n, data }
        }
        Beta::Complex => {
            let mut data = Vec::with_capacity(p * n);
            for &lam in spectrum.lambdas() {
                let sd = (lam / 2.0).sqrt();
                for _ in 0..n {
                    let re = sd * src.next();
                    let im = sd * src.next();
                    data.push((re, im));
                }
            }
            DataMatrix::Complex { p, n, data }
        }
    }
}

/// Cyclic Jacobi diagonalization of a dense symmetric matrix (row-major).
/// Returns unsorted eigenvalues.
fn jacobi_eigenvalues(a: &mut [f64], dim: usize) -> Result<Vec<f64>> {
    const MAX_SWEEPS: usize = 100;
    let norm: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![0.0; dim]);
    }
    let target = 1e-12 * norm;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for r in 0..dim {
            for c in r + 1..dim {
                off += a[r * dim + c] * a[r * dim + c];
            }
        }
        if (2.0 * off).sqrt() <= target {
            return Ok((0..dim).map(|i| a[i * dim + i]).collect());
        }
        for pq in 0..dim {
            for rq in pq + 1..dim {
                let apq = a[pq * dim + rq];
                if apq == 0.0 {
                    continue;
                }
                let app = a[pq * dim + pq];
                let aqq = a[rq * dim + rq];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/columns pq and rq
                for k in 0..dim {
                    let akp = a[k * dim + pq];
                    let akq = a[k * dim + rq];
                    a[k * dim + pq] = c * akp - s * akq;
                    a[k * dim + rq] = s * akp + c * akq;
                }
                for k in 0..dim {
                    let apk = a[pq * dim + k];
                    let aqk = a[rq * dim + k];
                    a[pq * dim + k] = c * apk - s * aqk;
                    a[rq * dim + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut off = 0.0;
    for r in 0..dim {
        for c in r + 1..dim {
            off += a[r * dim + c] * a[r * dim + c];
        }
    }
    Err(WishartError::JacobiNonConvergence { sweeps: MAX_SWEEPS, off: (2.0 * off).sqrt() })
}

/// Eigenvalues of W W^dag, sorted ascending.
///
/// The real case diagonalizes the p x p symmetric matrix directly; the
/// complex case embeds the Hermitian H into the 2p x 2p real symmetric
/// [[Re H, -Im H], [Im H, Re H]], whose spectrum doubles every eigenvalue,
/// and pairs them back off.
pub fn eigenvalues_wwdag(w: &DataMatrix) -> Result<Vec<f64>> {
    match w {
        DataMatrix::Real { p, n, data } => {
            let (p, n) = (*p, *n);
            let mut h = vec![0.0f64; p * p];
            for j in 0..p {
                for l in j..p {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += data[j * n + k] * data[l * n + k];
                    }
                    h[j * p + l] = acc;
                    h[l * p + j] = acc;
                }
            }
            let norm: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut eig = jacobi_eigenvalues(&mut h, p)?;
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            debug_assert!(eig.iter().all(|&v| v >= -1e-10 * norm.max(1.0)));
            Ok(eig)
        }
        DataMatrix::Complex { p, n, data } => {
            let (p, n) = (*p, *n);
            let mut re = vec![0.0f64; p * p];
            let mut im = vec![0.0f64; p * p];
            for j in 0..p {
                for l in 0..p {
                    let mut ar = 0.0;
                    let mut ai = 0.0;
                    for k in 0..n {
                        let (wr, wi) = data[j * n + k];
                        let (vr, vi) = data[l * n + k];
                        // W_{jk} * conj(W_{lk})
                        ar += wr * vr + wi * vi;
                        ai += wi * vr - wr * vi;
                    }
                    re[j * p + l] = ar;
                    im[j * p + l] = ai;
                }
            }
            let dim = 2 * p;
            let mut emb = vec![0.0f64; dim * dim];
            for j in 0..p {
                for l in 0..p {
                    emb[j * dim + l] = re[j * p + l];
                    emb[j * dim + p + l] = -im[j * p + l];
                    emb[(p + j) * dim + l] = im[j * p + l];
                    emb[(p + j) * dim + p + l] = re[j * p + l];
                }
            }
            let norm: f64 = emb.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut eig = jacobi_eigenvalues(&mut emb, dim)?;
            eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
            debug_assert!(eig.iter().all(|&v| v >= -1e-10 * norm.max(1.0)));
            // every Hermitian eigenvalue appears twice; average each pair
            let paired: Vec<f64> =
                eig.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect();
            Ok(paired)
        }
    }
}

/// Monte-Carlo eigenvalue histogram with Poisson error bands.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    pub sigma: Vec<f64>,
    pub seed: u64,
    pub samples: u64,
}

impl SpectrumHistogram {
    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }
}

/// Samples `samples` matrices and bins all eigenvalues. The histogram range
/// defaults to [0, 1.02 * max observed eigenvalue]; an explicit range pins
/// the bin width instead. Deterministic for fixed (seed, samples, bins,
/// spectrum) regardless of thread count.
pub fn mc_histogram(
    spectrum: &EmpiricalSpectrum,
    samples: u64,
    bins: usize,
    seed: RngSeed,
    range: Option<(f64, f64)>,
) -> Result<SpectrumHistogram> {
    assert!(samples >= 1 && bins >= 1);
    let per_sample: Vec<Result<Vec<f64>>> = exec::map_indexed(samples as usize, |i| {
        let w = sample_w(spectrum, seed, i as u64);
        eigenvalues_wwdag(&w)
    });
    let mut all = Vec::with_capacity(samples as usize * spectrum.p());
    for r in per_sample {
        all.extend(r?);
    }
    // round-off negatives from the eigensolver land in the first bin
    for v in &mut all {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            assert!(hi > lo);
            (lo, hi)
        }
        None => {
            let max = all.iter().cloned().fold(0.0f64, f64::max);
            (0.0, (max * 1.02).max(f64::MIN_POSITIVE))
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in &all {
        if v < lo || v > hi {
            continue;
        }
        let mut idx = ((v - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    let norm = 1.0 / (samples as f64 * spectrum.p() as f64 * width);
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 * norm).collect();
    let sigma: Vec<f64> = counts.iter().map(|&c| (c as f64).sqrt() * norm).collect();
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    Ok(SpectrumHistogram { bin_edges, counts, density, sigma, seed: seed.seed, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::validate_spectrum;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let w = DataMatrix::Real {
            p: 2,
            n: 3,
            data: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0],
        };
        let eig = eigenvalues_wwdag(&w).unwrap();
        assert_relative_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_identity_holds() {
        let s = validate_spectrum(Beta::Real, 12, &[0.4, 1.0, 2.3]).unwrap();
        let w = sample_w(&s, RngSeed::new(7), 0);
        let eig = eigenvalues_wwdag(&w).unwrap();
        let DataMatrix::Real { data, .. } = &w else { panic!() };
        let trace: f64 = {
            let n = s.n();
            (0..s.p())
                .map(|j| (0..n).map(|k| data[j * n + k] * data[j * n + k]).sum::<f64>())
                .sum()
        };
        assert_relative_eq!(eig.iter().sum::<f64>(), trace, max_relative = 1e-10);
    }

    #[test]
    fn complex_embedding_pairs_eigenvalues() {
        // Against the characteristic polynomial of a p = 2 Hermitian matrix.
        let s = validate_spectrum(Beta::Complex, 5, &[0.7, 1.4]).unwrap();
        let w = sample_w(&s, RngSeed::new(3), 11);
        let DataMatrix::Complex { p, n, data } = &w else { panic!() };
        let (p, n) = (*p, *n);
        assert_eq!(p, 2);
        let mut h = [[(0.0f64, 0.0f64); 2]; 2];
        for j in 0..p {
            for l in 0..p {
                let mut ar = 0.0;
                let mut ai = 0.0;
                for k in 0..n {
                    let (wr, wi) = data[j * n + k];
                    let (vr, vi) = data[l * n + k];
                    ar += wr * vr + wi * vi;
                    ai += wi * vr - wr * vi;
                }
                h[j][l] = (ar, ai);
            }
        }
        let tr = h[0][0].0 + h[1][1].0;
        let det = h[0][0].0 * h[1][1].0 - (h[0][1].0 * h[0][1].0 + h[0][1].1 * h[0][1].1);
        let disc = (tr * tr / 4.0 - det).sqrt();
        let expect = [tr / 2.0 - disc, tr / 2.0 + disc];
        let eig = eigenvalues_wwdag(&w).unwrap();
        assert_relative_eq!(eig[0], expect[0], max_relative = 1e-9);
        assert_relative_eq!(eig[1], expect[1], max_relative = 1e-9);
    }

    #[test]
    fn sampler_is_deterministic() {
        let s = validate_spectrum(Beta::Real, 8, &[0.5, 1.5]).unwrap();
        let a = sample_w(&s, RngSeed::new(42), 5);
        let b = sample_w(&s, RngSeed::new(42), 5);
        let (DataMatrix::Real { data: da, .. }, DataMatrix::Real { data: db, .. }) = (&a, &b)
        else {
            panic!()
        };
        assert_eq!(da, db);
    }

    #[test]
    fn row_variances_match_lambdas() {
        // Law of large numbers over many scalar draws of one row.
        let s = validate_spectrum(Beta::Real, 100, &[0.3, 2.0]).unwrap();
        let seed = RngSeed::new(1);
        let mut sums = [0.0f64; 2];
        let draws = 2000usize;
        for idx in 0..draws {
            let w = sample_w(&s, seed, idx as u64);
            let DataMatrix::Real { data, n, .. } = &w else { panic!() };
            for j in 0..2 {
                sums[j] += data[j * n..(j + 1) * n].iter().map(|v| v * v).sum::<f64>();
            }
        }
        let m = (draws * 100) as f64;
        for (j, &lam) in s.lambdas().iter().enumerate() {
            let mean = sums[j] / m;
            // var of x^2 is 2 lambda^2; 5 sigma window
            let sd = (2.0 * lam * lam / m).sqrt();
            assert!(
                (mean - lam).abs() < 5.0 * sd,
                "row {j}: sample variance {mean} vs {lam} (sd {sd})"
            );
        }
    }

    #[test]
    fn complex_pseudo_variance_vanishes() {
        // E[W^2] (no conjugate) is zero by circular symmetry.
        let s = validate_spectrum(Beta::Complex, 100, &[1.0]).unwrap();
        let seed = RngSeed::new(9);
        let mut acc = (0.0f64, 0.0f64);
        let draws = 1000usize;
        for idx in 0..draws {
            let w = sample_w(&s, seed, idx as u64);
            let DataMatrix::Complex { data, .. } = &w else { panic!() };
            for &(re, im) in data {
                acc.0 += re * re - im * im;
                acc.1 += 2.0 * re * im;
            }
        }
        let m = (draws * 100) as f64;
        let sd = (1.0f64 / m).sqrt(); // |W|^2 has unit scale
        assert!(acc.0.abs() / m < 5.0 * sd);
        assert!(acc.1.abs() / m < 5.0 * sd);
    }

    #[test]
    fn histogram_normalization_and_counts() {
        let s = validate_spectrum(Beta::Real, 10, &[0.5, 1.0]).unwrap();
        let h = mc_histogram(&s, 500, 24, RngSeed::new(11), None).unwrap();
        assert_eq!(h.counts.iter().sum::<u64>(), 500 * 2);
        let total: f64 = h.density.iter().map(|d| d * h.bin_width()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);

        let h1 = mc_histogram(&s, 1, 8, RngSeed::new(11), None).unwrap();
        assert_eq!(h1.counts.iter().sum::<u64>(), 2);
    }

    #[test]
    fn mean_eigenvalue_matches_first_moment() {
        let s = validate_spectrum(Beta::Real, 20, &[0.5, 1.0, 1.7]).unwrap();
        let seed = RngSeed::new(5);
        let samples = 3000u64;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for i in 0..samples {
            let eig = eigenvalues_wwdag(&sample_w(&s, seed, i)).unwrap();
            for v in eig {
                acc += v;
                acc2 += v * v;
            }
        }
        let m = (samples * 3) as f64;
        let mean = acc / m;
        let var = acc2 / m - mean * mean;
        let expect = s.n() as f64 / 3.0 * s.lambdas().iter().sum::<f64>();
        let se = (var / m).sqrt();
        assert!(
            (mean - expect).abs() < 5.0 * se,
            "mean {mean} vs {expect} (se {se})"
        );
    }

    #[test]
    fn permutation_invariance_chi_square() {
        // For lambda = c * 1_p the eigenvalue law is row-exchangeable; two
        // independent runs with permuted rows must agree to a two-sample
        // chi-square test. Equal eigenvalues are fine for sampling (only the
        // analytic formulas need distinctness).
        let a = EmpiricalSpectrum::new_unchecked(Beta::Real, 6, vec![0.8, 0.8, 0.8]);
        let samples = 4000u64;
        let range = Some((0.0, 20.0));
        let ha = mc_histogram(&a, samples, 20, RngSeed::new(100), range).unwrap();
        let hb = mc_histogram(&a, samples, 20, RngSeed::new(200), range).unwrap();
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        for (&ca, &cb) in ha.counts.iter().zip(&hb.counts) {
            if ca + cb >= 10 {
                let diff = ca as f64 - cb as f64;
                chi2 += diff * diff / (ca + cb) as f64;
                dof += 1;
            }
        }
        assert!(dof > 5);
        let reduced = chi2 / dof as f64;
        assert!(reduced < 2.0, "chi2/dof = {reduced}");
    }

    #[test]
    fn no_negative_eigenvalues_recorded() {
        let s = validate_spectrum(Beta::Complex, 6, &[1.0, 2.0]).unwrap();
        let h = mc_histogram(&s, 200, 16, RngSeed::new(3), None).unwrap();
        assert!(h.bin_edges[0] >= 0.0);
        assert_eq!(h.counts.iter().sum::<u64>(), 400);
    }
}
