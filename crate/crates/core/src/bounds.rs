//! Upper bounds on the global minimum of a polynomial from SOS densities.
//!
//! `ub(f, μ, r) = min { ∫ f σ dμ : ∫ σ dμ = 1, σ SOS of degree 2r }` is the smallest generalized
//! eigenvalue of the pencil `(A, M)` with `M(a,b) = ∫ x^{a+b} dμ` and `A(a,b) = ∫ f x^{a+b} dμ`
//! over the monomials of degree at most `r`. The push-forward variant restricts `σ` to `s ∘ f`
//! with `s` univariate, which turns both matrices into Hankel matrices of the moments of `f_#μ`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::measures::{MeasureError, MeasureSpec, MomentSequence};
use crate::numerics::{pencil_min, BigReal, NumericsError, SymMatrix, DEFAULT_PRECISION_BITS};
use crate::polyring::{MultiIndex, Polynomial};
use crate::pushforward::{PushforwardError, PushforwardMoments, DEFAULT_DEGREE_CAP};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("moment matrix is not numerically positive definite at {precision_bits} bits (pivot {pivot})")]
    PrecisionOrDegeneracy { precision_bits: usize, pivot: usize },
    #[error("bound needs moments of degree {needed}, above the budget of {cap}")]
    DegreeBudgetExceeded { needed: u64, cap: u32 },
    #[error("polynomial has {got} variables, measure lives on ℝ^{expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("level list must be strictly increasing")]
    LevelsNotIncreasing,
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Numerics(NumericsError),
}

impl From<PushforwardError> for BoundsError {
    fn from(e: PushforwardError) -> Self {
        match e {
            PushforwardError::DegreeBudgetExceeded { needed, cap } => Self::DegreeBudgetExceeded { needed, cap },
            PushforwardError::Measure(m) => Self::Measure(m),
            PushforwardError::Numerics(n) => Self::Numerics(n),
            other => Self::Numerics(NumericsError::Domain(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub precision_bits: usize,
    /// Largest total degree of any moment the solver may request.
    pub degree_cap: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { precision_bits: DEFAULT_PRECISION_BITS, degree_cap: DEFAULT_DEGREE_CAP }
    }
}

impl SolverOptions {
    pub fn with_precision(precision_bits: usize) -> Self {
        Self { precision_bits, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Standard,
    Pushforward,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Standard => "ub",
            Self::Pushforward => "ubpf",
        }
    }
}

/// Monomial basis of degree `≤ r` and the moment matrix over it.
#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub basis: Vec<MultiIndex>,
    pub matrix: SymMatrix,
}

impl MomentMatrix {
    pub fn build(seq: &MomentSequence, r: u32) -> Result<Self, MeasureError> {
        let basis = MultiIndex::all_up_to(seq.n_vars(), r);
        let matrix = sym_from_basis(&basis, seq.precision(), |idx| seq.moment(idx))?;
        Ok(Self { basis, matrix })
    }
}

/// `A(a,b) = ∫ f x^{a+b} dμ` over the same basis as [`MomentMatrix`].
#[derive(Clone, Debug)]
pub struct LocalizingMatrix {
    pub basis: Vec<MultiIndex>,
    pub matrix: SymMatrix,
}

impl LocalizingMatrix {
    pub fn build(seq: &MomentSequence, f: &Polynomial, r: u32) -> Result<Self, MeasureError> {
        if f.n_vars() != seq.n_vars() {
            return Err(MeasureError::DimMismatch { expected: seq.n_vars(), got: f.n_vars() });
        }
        let basis = MultiIndex::all_up_to(seq.n_vars(), r);
        let matrix = sym_from_basis(&basis, seq.precision(), |idx| {
            let mut total = BigReal::zero(seq.precision());
            for (gamma, c) in f.terms() {
                let m = seq.moment(&idx.add(gamma))?;
                if !m.is_zero() {
                    total += c * m;
                }
            }
            Ok(total)
        })?;
        Ok(Self { basis, matrix })
    }
}

fn sym_from_basis(
    basis: &[MultiIndex],
    precision: usize,
    mut entry: impl FnMut(&MultiIndex) -> Result<BigReal, MeasureError>,
) -> Result<SymMatrix, MeasureError> {
    let mut m = SymMatrix::zeros(basis.len(), precision);
    for i in 0..basis.len() {
        for j in 0..=i {
            m.set(i, j, entry(&basis[i].add(&basis[j]))?);
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct BoundDiagnostics {
    /// Precision the returned value was computed at (doubled once if the first attempt failed).
    pub precision_bits: usize,
    pub cholesky_min_pivot: BigReal,
    pub eig_residual: BigReal,
}

#[derive(Clone, Debug)]
pub struct BoundResult {
    pub kind: BoundKind,
    pub value: BigReal,
    pub level_r: u32,
    /// Optimal density `σ = p²` with `∫ σ dμ = 1`.
    pub sigma: Polynomial,
    /// `p`, the square root of `sigma`.
    pub sqrt_density: Polynomial,
    /// Univariate `s` with `σ = s ∘ f`, for push-forward bounds.
    pub univariate_s: Option<Polynomial>,
    pub diagnostics: BoundDiagnostics,
}

fn check_dims(f: &Polynomial, mu: &MeasureSpec) -> Result<(), BoundsError> {
    if f.n_vars() != mu.n_vars() {
        return Err(BoundsError::DimMismatch { expected: mu.n_vars(), got: f.n_vars() });
    }
    Ok(())
}

/// Runs `attempt` at the requested precision and once more at twice that if the moment matrix
/// loses definiteness.
fn with_retry(
    precision_bits: usize,
    mut attempt: impl FnMut(usize) -> Result<BoundResult, BoundsError>,
) -> Result<BoundResult, BoundsError> {
    match attempt(precision_bits) {
        Err(BoundsError::Numerics(NumericsError::NotPositiveDefinite(_))) => match attempt(2 * precision_bits) {
            Err(BoundsError::Numerics(NumericsError::NotPositiveDefinite(pivot))) => {
                Err(BoundsError::PrecisionOrDegeneracy { precision_bits: 2 * precision_bits, pivot })
            }
            other => other,
        },
        other => other,
    }
}

/// `ub(f, μ, r)`.
pub fn compute_ub(f: &Polynomial, mu: &MeasureSpec, r: u32, opts: &SolverOptions) -> Result<BoundResult, BoundsError> {
    check_dims(f, mu)?;
    with_retry(opts.precision_bits, |p| {
        let seq = MomentSequence::new(mu.clone(), p);
        compute_ub_with(&seq, f, r, opts.degree_cap)
    })
}

/// `ub(f, μ, r)` against an existing moment sequence, at its precision and without retry.
pub fn compute_ub_with(
    seq: &MomentSequence,
    f: &Polynomial,
    r: u32,
    degree_cap: u32,
) -> Result<BoundResult, BoundsError> {
    if f.n_vars() != seq.n_vars() {
        return Err(BoundsError::DimMismatch { expected: seq.n_vars(), got: f.n_vars() });
    }
    let needed = 2 * r as u64 + f.degree().unwrap_or(0) as u64;
    if needed > degree_cap as u64 {
        return Err(BoundsError::DegreeBudgetExceeded { needed, cap: degree_cap });
    }
    let p = seq.precision();
    let f = f.with_precision(p);
    let m = MomentMatrix::build(seq, r)?;
    let a = LocalizingMatrix::build(seq, &f, r)?;
    let pm = pencil_min(&a.matrix, &m.matrix).map_err(BoundsError::Numerics)?;
    let mut sqrt_density = Polynomial::zero(seq.n_vars());
    for (idx, c) in m.basis.iter().zip(&pm.vector) {
        sqrt_density.add_term(idx.clone(), c.clone());
    }
    let (sqrt_density, sigma) = normalize_square(sqrt_density, |s| seq.integrate_poly(s))?;
    Ok(BoundResult {
        kind: BoundKind::Standard,
        value: pm.value,
        level_r: r,
        sigma,
        sqrt_density,
        univariate_s: None,
        diagnostics: BoundDiagnostics {
            precision_bits: p,
            cholesky_min_pivot: pm.min_pivot,
            eig_residual: pm.residual,
        },
    })
}

/// Rescales `q` so that `∫ q² = 1` under `integrate`; returns `(q, q²)`.
fn normalize_square(
    q: Polynomial,
    integrate: impl Fn(&Polynomial) -> Result<BigReal, MeasureError>,
) -> Result<(Polynomial, Polynomial), BoundsError> {
    let sq = q.pow(2);
    let mass = integrate(&sq)?;
    if !mass.is_positive() {
        return Err(BoundsError::Numerics(NumericsError::Domain("density has non-positive mass".into())));
    }
    let scale = mass.sqrt().recip();
    let q = q.scale(&scale);
    let sq = sq.scale(&scale.powi(2));
    Ok((q, sq))
}

/// `ub-pf(f, μ, r)`: the bound over densities `s ∘ f` with `s` a univariate SOS of degree `2r`.
pub fn compute_ubpf(
    f: &Polynomial,
    mu: &MeasureSpec,
    r: u32,
    opts: &SolverOptions,
) -> Result<BoundResult, BoundsError> {
    check_dims(f, mu)?;
    with_retry(opts.precision_bits, |p| {
        let seq = Arc::new(MomentSequence::new(mu.clone(), p));
        let pm = PushforwardMoments::with_degree_cap(f.clone(), seq, opts.degree_cap);
        compute_ubpf_with(&pm, r)
    })
}

/// `ub-pf` against existing push-forward moments, at their precision and without retry.
pub fn compute_ubpf_with(pm: &PushforwardMoments, r: u32) -> Result<BoundResult, BoundsError> {
    let p = pm.precision();
    // A constant f pushes μ to a point mass, whose Hankel matrices have rank one: only s = const
    // is identifiable and every level gives f itself.
    let r_eff = if pm.f().degree().unwrap_or(0) == 0 { 0 } else { r };
    let n = r_eff as usize + 1;
    let moments: Vec<BigReal> = (0..=2 * r_eff + 1).map(|k| pm.pf_moment(k)).collect::<Result<_, _>>()?;
    let m = SymMatrix::from_fn(n, |i, j| moments[i + j].clone());
    let a = SymMatrix::from_fn(n, |i, j| moments[i + j + 1].clone());
    let eig = pencil_min(&a, &m).map_err(BoundsError::Numerics)?;
    let q = Polynomial::univariate(&eig.vector);
    // ∫ (q∘f)² dμ = Σ_k [q²]_k · ∫ f^k dμ.
    let (q, s) = normalize_square(q, |s| {
        let mut total = BigReal::zero(p);
        for (idx, c) in s.terms() {
            total += c * &moments[idx.exponents()[0] as usize];
        }
        Ok(total)
    })?;
    let sqrt_density =
        pm.f().compose_into(&q).map_err(|e| BoundsError::Numerics(NumericsError::Domain(e.to_string())))?;
    let sigma = pm.f().compose_into(&s).map_err(|e| BoundsError::Numerics(NumericsError::Domain(e.to_string())))?;
    Ok(BoundResult {
        kind: BoundKind::Pushforward,
        value: eig.value,
        level_r: r,
        sigma,
        sqrt_density,
        univariate_s: Some(s),
        diagnostics: BoundDiagnostics {
            precision_bits: p,
            cholesky_min_pivot: eig.min_pivot,
            eig_residual: eig.residual,
        },
    })
}

/// Bounds for each level in `r_list`, evaluated in parallel. Errors are reported per entry.
pub fn bound_sequence(
    f: &Polynomial,
    mu: &MeasureSpec,
    r_list: &[u32],
    kind: BoundKind,
    opts: &SolverOptions,
) -> Result<Vec<Result<BoundResult, BoundsError>>, BoundsError> {
    if r_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BoundsError::LevelsNotIncreasing);
    }
    check_dims(f, mu)?;
    Ok(r_list
        .par_iter()
        .map(|&r| match kind {
            BoundKind::Standard => compute_ub(f, mu, r, opts),
            BoundKind::Pushforward => compute_ubpf(f, mu, r, opts),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: usize = 256;

    fn opts() -> SolverOptions {
        SolverOptions::with_precision(P)
    }

    fn gauss() -> MeasureSpec {
        MeasureSpec::gamma(BigReal::from_i64(2, P), 1).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        Polynomial::parse(s, 1, P).unwrap()
    }

    #[test]
    fn constant_pushforward_is_a_point_mass() {
        for r in 0..4 {
            let b = compute_ubpf(&poly("3"), &gauss(), r, &opts()).unwrap();
            assert_eq!(b.value.to_f64(), 3.0);
            assert_eq!(b.level_r, r);
        }
    }

    #[test]
    fn constant_objective() {
        for r in 0..4 {
            let b = compute_ub(&poly("7"), &gauss(), r, &opts()).unwrap();
            assert!((b.value.to_f64() - 7.0).abs() < 1e-40);
        }
    }

    #[test]
    fn quadratic_low_levels() {
        for r in [0, 1] {
            let b = compute_ub(&poly("x1^2"), &gauss(), r, &opts()).unwrap();
            assert!((b.value.to_f64() - 0.5).abs() < 1e-40, "r = {r}");
            assert_eq!(b.level_r, r);
        }
        let b = compute_ub(&poly("x1^2"), &gauss(), 2, &opts()).unwrap();
        assert!(b.value.to_f64() < 0.5);
    }

    #[test]
    fn matrices_for_r1() {
        let seq = MomentSequence::new(gauss(), P);
        let m = MomentMatrix::build(&seq, 1).unwrap();
        let a = LocalizingMatrix::build(&seq, &poly("x1^2"), 1).unwrap();
        let got: Vec<f64> =
            (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| m.matrix.get(i, j).to_f64()).collect();
        assert_eq!(got, vec![1.0, 0.0, 0.0, 0.5]);
        assert_eq!(a.matrix.get(0, 0).to_f64(), 0.5);
        assert_eq!(a.matrix.get(1, 1).to_f64(), 0.75);
        assert_eq!(a.matrix.get(0, 1).to_f64(), 0.0);
    }

    #[test]
    fn identity_pushforward_matches_standard() {
        let a = compute_ub(&poly("x1"), &gauss(), 3, &opts()).unwrap();
        let b = compute_ubpf(&poly("x1"), &gauss(), 3, &opts()).unwrap();
        assert!((a.value.clone() - &b.value).abs().to_f64() < 1e-50);
        assert!(a.value.is_negative());
    }

    #[test]
    fn certificates_hold() {
        let mu = gauss();
        let seq = MomentSequence::new(mu.clone(), P);
        let f = poly("x1^2 + x1^6");
        for b in [compute_ub(&f, &mu, 5, &opts()).unwrap(), compute_ubpf(&f, &mu, 3, &opts()).unwrap()] {
            let tol = b.diagnostics.eig_residual.clone() * BigReal::from_i64(10, P);
            let mass = seq.integrate_poly(&b.sigma).unwrap();
            assert!((mass - BigReal::one(P)).abs() <= tol);
            let obj = seq.integrate_poly(&b.sigma.mul(&f).unwrap()).unwrap();
            assert!((obj - &b.value).abs() <= tol, "{:?}", b.kind);
            let diff = b.sqrt_density.pow(2).sub(&b.sigma).unwrap();
            assert!(diff.terms().all(|(_, c)| c.abs().to_f64() < 1e-60));
        }
    }

    #[test]
    fn sequences() {
        let out = bound_sequence(&poly("x1^2"), &gauss(), &[0, 1], BoundKind::Standard, &opts()).unwrap();
        let v: Vec<f64> = out.into_iter().map(|b| b.unwrap().value.to_f64()).collect();
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-40));
        assert!(bound_sequence(&poly("x1^2"), &gauss(), &[], BoundKind::Standard, &opts()).unwrap().is_empty());
        assert_eq!(
            bound_sequence(&poly("x1^2"), &gauss(), &[2, 1], BoundKind::Standard, &opts()).unwrap_err(),
            BoundsError::LevelsNotIncreasing
        );
    }

    #[test]
    fn budget_and_dims() {
        let o = SolverOptions { precision_bits: P, degree_cap: 10 };
        assert!(matches!(
            compute_ub(&poly("x1^2"), &gauss(), 5, &o),
            Err(BoundsError::DegreeBudgetExceeded { needed: 12, cap: 10 })
        ));
        assert!(matches!(compute_ubpf(&poly("x1^2"), &gauss(), 5, &o), Err(BoundsError::DegreeBudgetExceeded { .. })));
        let f2 = Polynomial::parse("x1^2", 2, P).unwrap();
        assert!(matches!(compute_ub(&f2, &gauss(), 1, &opts()), Err(BoundsError::DimMismatch { .. })));
    }
}
