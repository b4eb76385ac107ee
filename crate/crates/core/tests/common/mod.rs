//! Independent oracles and invariant checks for the bound solvers, shared by the property tests
//! and the acceptance harness. Each check returns `Err` with a readable reason instead of
//! panicking, so callers can report it.

#![allow(dead_code)]

use std::sync::Arc;

use rayon::prelude::*;
use sosub_core::bounds::{compute_ub, compute_ubpf, BoundKind, BoundResult, SolverOptions};
use sosub_core::measures::{gamma_alpha_moment, MeasureSpec, MomentSequence};
use sosub_core::numerics::quadrature::{geometric_breaks, tanh_sinh_panels, TanhSinhOptions};
use sosub_core::numerics::{cholesky, BigReal};
use sosub_core::polyring::{MultiIndex, Polynomial};
use sosub_core::pushforward::PushforwardMoments;

/// Measures used by the random instances. Everything except `Gamma3` has `f64` moments in
/// closed form without the Gamma function, which the brute-force oracle relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestMeasure {
    Gamma05,
    Gamma1,
    Gamma2,
    Gamma3,
    BoxSym,
    BoxShifted,
}

impl TestMeasure {
    pub const ALL: [TestMeasure; 6] = [
        TestMeasure::Gamma05,
        TestMeasure::Gamma1,
        TestMeasure::Gamma2,
        TestMeasure::Gamma3,
        TestMeasure::BoxSym,
        TestMeasure::BoxShifted,
    ];

    /// Measures with an elementary `f64` moment formula.
    pub const ELEMENTARY: [TestMeasure; 4] =
        [TestMeasure::Gamma1, TestMeasure::Gamma2, TestMeasure::BoxSym, TestMeasure::BoxShifted];

    pub fn text(self, n: usize) -> String {
        let one = |s: &str| vec![s; n].join(",");
        match self {
            Self::Gamma05 => format!("gamma:alpha=0.5,n={n}"),
            Self::Gamma1 => format!("gamma:alpha=1,n={n}"),
            Self::Gamma2 => format!("gamma:alpha=2,n={n}"),
            Self::Gamma3 => format!("gamma:alpha=3,n={n}"),
            Self::BoxSym => format!("box:{}", one("-1..1")),
            Self::BoxShifted => format!("box:{}", one("0..2")),
        }
    }

    pub fn spec(self, n: usize, precision: usize) -> MeasureSpec {
        MeasureSpec::parse(&self.text(n), precision).expect("test measure parses")
    }

    /// `∫ x^k dμ` in one variable, from elementary formulas.
    pub fn moment_f64(self, k: u32) -> f64 {
        let even = k % 2 == 0;
        match self {
            // k! for Γ₁ (density e^{-|x|}/2).
            Self::Gamma1 => {
                if even {
                    (1..=k).map(f64::from).product()
                } else {
                    0.0
                }
            }
            // (k−1)!!/2^{k/2} for Γ₂ (density e^{-x²}/√π).
            Self::Gamma2 => {
                if even {
                    (1..k).step_by(2).map(f64::from).product::<f64>() / 2f64.powi(k as i32 / 2)
                } else {
                    0.0
                }
            }
            Self::BoxSym => {
                if even {
                    1.0 / (k as f64 + 1.0)
                } else {
                    0.0
                }
            }
            Self::BoxShifted => 2f64.powi(k as i32) / (k as f64 + 1.0),
            Self::Gamma05 | Self::Gamma3 => panic!("no elementary moment formula for {self:?}"),
        }
    }
}

/// A random objective: integer coefficients on the graded-lex monomials of `basis_degree`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub n_vars: usize,
    pub measure: TestMeasure,
    pub coeffs: Vec<i64>,
    pub basis_degree: u32,
}

impl Instance {
    pub fn polynomial(&self, precision: usize) -> Polynomial {
        let basis = MultiIndex::all_up_to(self.n_vars, self.basis_degree);
        let mut f = Polynomial::zero(self.n_vars);
        for (idx, &c) in basis.iter().zip(&self.coeffs) {
            f.add_term(idx.clone(), BigReal::from_i64(c, precision));
        }
        f
    }

    /// Largest level checked: 10 in one variable, 6 in two.
    pub fn r_max(&self) -> u32 {
        if self.n_vars == 1 {
            10
        } else {
            6
        }
    }
}

/// Relative slack for comparisons at `precision` bits.
fn rounding_slack(precision: usize) -> f64 {
    2f64.powi(-(precision as i32) + 32)
}

/// `∫ σ dμ = 1` and `∫ f σ dμ = value`, both within `10·eig_residual` plus rounding.
pub fn check_certificate(f: &Polynomial, mu: &MeasureSpec, res: &BoundResult) -> Result<(), String> {
    let p = res.diagnostics.precision_bits;
    let seq = MomentSequence::new(mu.clone(), p);
    let residual = res.diagnostics.eig_residual.to_f64();
    let mass = seq.integrate_poly(&res.sigma).map_err(|e| e.to_string())?;
    let objective = seq
        .integrate_poly(&f.with_precision(p).mul(&res.sigma).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let value = res.value.to_f64();
    let mass_err = (mass.to_f64() - 1.0).abs();
    let obj_err = (&objective - &res.value).abs().to_f64();
    let slack = rounding_slack(p);
    if mass_err > 10.0 * residual + slack {
        return Err(format!("{} r={}: ∫σ − 1 = {mass_err:e} (residual {residual:e})", res.kind.label(), res.level_r));
    }
    if obj_err > 10.0 * residual + slack * value.abs().max(1.0) {
        return Err(format!(
            "{} r={}: ∫fσ − value = {obj_err:e} (residual {residual:e})",
            res.kind.label(),
            res.level_r
        ));
    }
    if res
        .sqrt_density
        .pow(2)
        .sub(&res.sigma)
        .map_err(|e| e.to_string())?
        .terms()
        .any(|(_, c)| c.abs().to_f64() > slack * 1e6)
    {
        return Err(format!("{} r={}: sigma is not the square of sqrt_density", res.kind.label(), res.level_r));
    }
    Ok(())
}

/// `ub(r+1) ≤ ub(r) + 10⁻²⁰` for `r < r_max`, with certificates checked at every level.
pub fn check_monotone(inst: &Instance, precision: usize) -> Result<Vec<f64>, String> {
    let f = inst.polynomial(precision);
    let mu = inst.measure.spec(inst.n_vars, precision);
    let opts = SolverOptions::with_precision(precision);
    let mut prev: Option<BigReal> = None;
    let mut values = Vec::new();
    for r in 0..=inst.r_max() {
        let res = compute_ub(&f, &mu, r, &opts).map_err(|e| format!("r = {r}: {e}"))?;
        check_certificate(&f, &mu, &res)?;
        if let Some(p) = &prev {
            let excess = (&res.value - p).to_f64();
            if excess > 1e-20 {
                return Err(format!("ub rose by {excess:e} from r = {} to r = {r}", r - 1));
            }
        }
        values.push(res.value.to_f64());
        prev = Some(res.value);
    }
    Ok(values)
}

/// `f_min ≤ ub(f, r·deg f) ≤ ub-pf(f, r) + 10⁻²⁰` on `Γ₂` for `r ≤ r_max`.
pub fn check_sandwich(f_text: &str, f_min: f64, r_max: u32, precision: usize) -> Result<(), String> {
    let f = Polynomial::parse(f_text, 1, precision).map_err(|e| e.to_string())?;
    let deg = f.degree().unwrap_or(0);
    let mu = TestMeasure::Gamma2.spec(1, precision);
    let opts = SolverOptions::with_precision(precision);
    for r in 0..=r_max {
        let pf = compute_ubpf(&f, &mu, r, &opts).map_err(|e| format!("ubpf r = {r}: {e}"))?;
        let ub = compute_ub(&f, &mu, r * deg, &opts).map_err(|e| format!("ub r = {}: {e}", r * deg))?;
        check_certificate(&f, &mu, &pf)?;
        check_certificate(&f, &mu, &ub)?;
        let gap = (&pf.value - &ub.value).to_f64();
        if gap < -1e-20 {
            return Err(format!("{f_text}, r = {r}: ubpf below ub by {:e}", -gap));
        }
        if ub.value.to_f64() < f_min - 1e-20 {
            return Err(format!("{f_text}, r = {r}: ub {} below f_min {f_min}", ub.value.to_f64()));
        }
    }
    Ok(())
}

/// Rayleigh quotient `qᵀAq / qᵀMq` for `q = (cos θ, sin θ)` over the densities `(a + bx)²`.
fn r1_quotient(a: &[[f64; 2]; 2], m: &[[f64; 2]; 2], theta: f64) -> f64 {
    let q = [theta.cos(), theta.sin()];
    let form = |x: &[[f64; 2]; 2]| x[0][0] * q[0] * q[0] + 2.0 * x[0][1] * q[0] * q[1] + x[1][1] * q[1] * q[1];
    form(a) / form(m)
}

/// Minimum of `∫ f (a+bx)² dμ / ∫ (a+bx)² dμ` by a dense grid in the angle of `(a, b)` followed
/// by golden-section refinement around the best node. All arithmetic in `f64`.
pub fn brute_force_r1(coeffs: &[f64], measure: TestMeasure) -> f64 {
    let mom = |k: u32| measure.moment_f64(k);
    let mut m = [[0.0; 2]; 2];
    let mut a = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = mom((i + j) as u32);
            a[i][j] = coeffs.iter().enumerate().map(|(k, c)| c * mom((i + j + k) as u32)).sum();
        }
    }
    let n = 200_000;
    let step = std::f64::consts::PI / n as f64;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for i in 0..n {
        let t = i as f64 * step;
        let v = r1_quotient(&a, &m, t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let (mut lo, mut hi) = (best_t - step, best_t + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if r1_quotient(&a, &m, x1) < r1_quotient(&a, &m, x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    best.min(r1_quotient(&a, &m, (lo + hi) / 2.0))
}

/// The solver at `r = 1` against [`brute_force_r1`], to `10⁻⁶` relative to `max(1, |value|)`.
pub fn check_brute_force_r1(coeffs: &[i64], measure: TestMeasure, precision: usize) -> Result<(), String> {
    let mut f = Polynomial::zero(1);
    for (k, &c) in coeffs.iter().enumerate() {
        f.add_term(MultiIndex::new(vec![k as u32]), BigReal::from_i64(c, precision));
    }
    let mu = measure.spec(1, precision);
    let res = compute_ub(&f, &mu, 1, &SolverOptions::with_precision(precision)).map_err(|e| e.to_string())?;
    let oracle = brute_force_r1(&coeffs.iter().map(|&c| c as f64).collect::<Vec<_>>(), measure);
    let value = res.value.to_f64();
    if (value - oracle).abs() > 1e-6 * value.abs().max(1.0) {
        return Err(format!("{coeffs:?} on {measure:?}: pencil {value} vs grid {oracle}"));
    }
    Ok(())
}

/// `x₁²` on `Γ_α ⊗ Γ_α` gives the same `ub` and `ub-pf` as `x²` on `Γ_α`, to `10⁻¹⁵`.
pub fn check_product_reduction(alpha: &str, r_max: u32, precision: usize) -> Result<(), String> {
    let mu1 = MeasureSpec::parse(&format!("gamma:alpha={alpha},n=1"), precision).map_err(|e| e.to_string())?;
    let mu2 = MeasureSpec::parse(&format!("gamma:alpha={alpha},n=2"), precision).map_err(|e| e.to_string())?;
    let f1 = Polynomial::parse("x1^2", 1, precision).map_err(|e| e.to_string())?;
    let f2 = f1.embed(2);
    let opts = SolverOptions::with_precision(precision);
    for r in 0..=r_max {
        for kind in [BoundKind::Standard, BoundKind::Pushforward] {
            let solve = |f: &Polynomial, mu: &MeasureSpec| match kind {
                BoundKind::Standard => compute_ub(f, mu, r, &opts),
                BoundKind::Pushforward => compute_ubpf(f, mu, r, &opts),
            };
            let one = solve(&f1, &mu1).map_err(|e| e.to_string())?;
            let two = solve(&f2, &mu2).map_err(|e| e.to_string())?;
            check_certificate(&f2, &mu2, &two)?;
            let diff = (&one.value - &two.value).abs().to_f64();
            if diff > 1e-15 {
                return Err(format!("alpha = {alpha}, {} r = {r}: n=1 and n=2 differ by {diff:e}", kind.label()));
            }
        }
    }
    Ok(())
}

/// `∫ x^k ŵ₁(x) dx` with `ŵ₁(x) = w₁(2x)`, by substitution: `2^{-k-1} ∫ x^k dΓ₁`.
fn scaled_moment(seq: &MomentSequence, idx: &MultiIndex) -> BigReal {
    let total: u32 = idx.exponents().iter().sum();
    let n = idx.n_vars() as i64;
    seq.moment(idx).expect("Γ₁ moment").mul_pow2(-(total as i64) - n)
}

/// `∫ σ(x) w₁(2x) dx` on ℝ by tanh-sinh quadrature over `[0, 64]` of `σ(x) + σ(−x)`.
fn scaled_mass_by_quadrature(sigma: &Polynomial, precision: usize) -> BigReal {
    let half = BigReal::from_ratio(1, 2, precision);
    let opts = TanhSinhOptions { rel_tol: 1e-30, abs_tol: 0.0, max_level: 10, min_level: 4 };
    let breaks = geometric_breaks(-4, 64.0, precision);
    let r = tanh_sinh_panels(
        |x| {
            let s = sigma.eval_univariate(x) + sigma.eval_univariate(&(-x));
            s * &half * (-x.mul_pow2(1)).exp()
        },
        &breaks,
        &opts,
    );
    r.value
}

/// For `σ = q²` normalised against `ŵ₁(x) = w₁(2x)` on ℝⁿ, the transformed density
/// `σ(x/2)/2ⁿ` has unit mass under `Γ₁`. In one variable the normalisation comes from direct
/// quadrature; in two it comes from the substituted moments.
pub fn check_scaled_density(q_coeffs: &[i64], n_vars: usize, precision: usize) -> Result<(), String> {
    let degree = if n_vars == 1 { 3 } else { 2 };
    let basis = MultiIndex::all_up_to(n_vars, degree);
    let mut q = Polynomial::zero(n_vars);
    for (idx, &c) in basis.iter().zip(q_coeffs) {
        q.add_term(idx.clone(), BigReal::from_i64(c, precision));
    }
    if q.is_zero() {
        return Ok(());
    }
    let sigma = q.pow(2);
    let seq = MomentSequence::new(TestMeasure::Gamma1.spec(n_vars, precision), precision);
    let mass = if n_vars == 1 {
        scaled_mass_by_quadrature(&sigma, precision)
    } else {
        sigma.terms().fold(BigReal::zero(precision), |acc, (idx, c)| acc + c * scaled_moment(&seq, idx))
    };
    let sigma = sigma.scale(&mass.recip());
    let half = BigReal::from_ratio(1, 2, precision);
    let transformed =
        sigma.scale_variables(&half).map_err(|e| e.to_string())?.scale(&BigReal::pow2(-(n_vars as i64), precision));
    let total = seq.integrate_poly(&transformed).map_err(|e| e.to_string())?;
    let err = (total.to_f64() - 1.0).abs();
    if err > 1e-20 {
        return Err(format!("q = {q_coeffs:?}, n = {n_vars}: ∫ σ(x/2)/2ⁿ dΓ₁ − 1 = {err:e}"));
    }
    Ok(())
}

/// Cholesky succeeds on the moment matrix of every test measure for `r ≤ r_max`, in `n_vars`.
pub fn check_moment_matrices_pd(n_vars: usize, r_max: u32, precision: usize) -> Result<(), String> {
    for m in TestMeasure::ALL {
        let seq = MomentSequence::new(m.spec(n_vars, precision), precision);
        let mm = sosub_core::bounds::MomentMatrix::build(&seq, r_max).map_err(|e| e.to_string())?;
        cholesky(&mm.matrix).map_err(|e| format!("{m:?}, n = {n_vars}, r = {r_max}: {e}"))?;
    }
    Ok(())
}

/// The push-forward Hankel matrix `(∫ f^{i+j} dμ)` of size `size` is positive definite.
pub fn check_pf_hankel_pd(f_text: &str, size: usize, precision: usize) -> Result<(), String> {
    let f = Polynomial::parse(f_text, 1, precision).map_err(|e| e.to_string())?;
    let base = Arc::new(MomentSequence::new(TestMeasure::Gamma2.spec(1, precision), precision));
    let pm = PushforwardMoments::new(f, base);
    let moments: Vec<BigReal> =
        (0..2 * size as u32 - 1).map(|k| pm.pf_moment(k)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let h = sosub_core::numerics::SymMatrix::from_fn(size, |i, j| moments[i + j].clone());
    cholesky(&h).map_err(|e| format!("{f_text}, size {size}: {e}"))?;
    Ok(())
}

/// Quadrature settings for the half-line oracle at 192 bits.
pub const ORACLE_BITS: usize = 192;

pub fn oracle_opts() -> TanhSinhOptions {
    TanhSinhOptions { rel_tol: 1e-26, abs_tol: 0.0, max_level: 12, min_level: 4 }
}

/// Upper limit where `x^k e^{-x^α}` has fallen below `e^{-150}` of its peak (found in `f64`).
pub fn cutoff(k: u32, alpha: f64) -> f64 {
    let log_f = |x: f64| k as f64 * x.ln() - x.powf(alpha);
    let peak_x = (k.max(1) as f64 / alpha).powf(1.0 / alpha);
    let peak = log_f(peak_x);
    let mut x = peak_x.max(1.0);
    while log_f(x) > peak - 150.0 {
        x *= 1.25;
    }
    x
}

/// `∫₀^X x^k e^{-x^α} dx` by panelled tanh-sinh quadrature.
pub fn half_line_integral(k: u32, alpha: &BigReal) -> BigReal {
    let p = alpha.precision();
    let upper = cutoff(k, alpha.to_f64());
    let breaks = geometric_breaks(-6, upper, p);
    let r = tanh_sinh_panels(|x| x.powi(k) * (-x.powf(alpha)).exp(), &breaks, &oracle_opts());
    assert!(r.converged, "quadrature did not converge for k = {k}");
    r.value
}

/// Compares the closed-form `Γ_α` moments with `∫ x^k e^{-|x|^α} / ∫ e^{-|x|^α}` by quadrature,
/// for every `α` in `alphas` and even `k ≤ k_max`. Returns the cases off by `10⁻²⁰` or more.
pub fn gamma_moment_failures(alphas: &[f64], k_max: u32) -> Vec<String> {
    let p = ORACLE_BITS;
    let cases: Vec<(f64, u32)> = alphas.iter().flat_map(|&a| (0..=k_max).step_by(2).map(move |k| (a, k))).collect();
    let norms: Vec<(f64, BigReal)> =
        alphas.par_iter().map(|&a| (a, half_line_integral(0, &BigReal::from_f64(a, p)))).collect();
    cases
        .par_iter()
        .filter_map(|&(a, k)| {
            let alpha = BigReal::from_f64(a, p);
            let norm = &norms.iter().find(|(b, _)| *b == a).expect("norm computed").1;
            let oracle = half_line_integral(k, &alpha) / norm;
            let closed = gamma_alpha_moment(&alpha, k).expect("valid alpha");
            let rel = ((closed - &oracle) / &oracle).abs().to_f64();
            (rel >= 1e-20).then(|| format!("alpha = {a}, k = {k}: relative error {rel:e}"))
        })
        .collect()
}
