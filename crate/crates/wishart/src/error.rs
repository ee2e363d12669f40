use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, Error)]
pub enum WishartError {
    #[error("spectrum must contain at least one eigenvalue")]
    EmptySpectrum,

    #[error("eigenvalue {0} is not strictly positive")]
    NonPositiveEigenvalue(f64),

    #[error("eigenvalues {lo} and {hi} are degenerate (relative gap {gap:.3e} < {tol:.0e})")]
    DegenerateSpectrum { lo: f64, hi: f64, gap: f64, tol: f64 },

    #[error("spectrum size p = {p} exceeds series length n = {n}")]
    DimensionError { p: usize, n: usize },

    #[error("real-case density requires n > p + 3 (got n = {n}, p = {p})")]
    RealCaseTooSmallN { n: usize, p: usize },

    #[error("index {index} out of bounds for spectrum of length {len}")]
    IndexError { index: usize, len: usize },

    #[error("argument x0 = {0} lies on the closed positive real axis")]
    DomainError(String),

    #[error(
        "quadrature did not converge: error estimate {err:.3e} above tolerance {tol:.3e} \
         after {levels} refinement levels"
    )]
    QuadratureNonConvergence { err: f64, tol: f64, levels: u32 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    JacobiNonConvergence { sweeps: usize, off: f64 },
}

pub type Result<T> = std::result::Result<T, WishartError>;
