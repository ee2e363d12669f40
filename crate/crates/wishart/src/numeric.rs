//! Small floating-point helpers used across the density modules.

use num_complex::Complex64;

/// Neumaier-compensated accumulator for long real sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated accumulator for complex sums (per-component).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSumC {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl CompensatedSumC {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Table of ln(m!) for m = 0..=max, built by compensated cumulative summation.
///
/// The factorials that enter the density formulas appear only through
/// differences of logarithms, so absolute accuracy of ~1e-12 is ample.
#[derive(Debug, Clone)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn up_to(max: usize) -> Self {
        let mut table = Vec::with_capacity(max + 1);
        let mut acc = CompensatedSum::new();
        table.push(0.0);
        for m in 1..=max {
            acc.add((m as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        self.table[m]
    }
}

/// Machine value used to clamp tiny negative densities produced by round-off.
pub const ERR_FLOOR: f64 = 1e-9;

/// Minimal allowed relative gap between consecutive eigenvalues.
pub const DEGENERACY_TOL: f64 = 1e-8;
