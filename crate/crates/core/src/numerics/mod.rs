//! Extended-precision scalars and the dense kernels built on them.

mod bigreal;
mod gamma;
mod linalg;
pub mod quadrature;
mod roots;

pub use bigreal::{BigReal, MIN_PRECISION_BITS};
pub use gamma::gamma_fn;
pub use linalg::{
    cholesky, jacobi_eigen, pencil_min, sym_eig_min, CholeskyFactor, PencilMin, SymMatrix, DEFAULT_MAX_SWEEPS,
};
pub use roots::bisect_root;

/// Default working precision in bits.
pub const DEFAULT_PRECISION_BITS: usize = 512;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("matrix is not positive definite at working precision (pivot {0})")]
    NotPositiveDefinite(usize),
    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("root is not bracketed by [{lo}, {hi}]")]
    BracketInvalid { lo: f64, hi: f64 },
    #[error("cannot parse number {0:?}")]
    Parse(String),
}
