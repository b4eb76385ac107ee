//! Push-forward measures `f_#μ`: their moments `∫ f^k dμ`, and densities on `(0, ∞)` for even
//! polynomials pushed through `Γ_α`.

use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::measures::{gamma_alpha_normalizer, MeasureError, MomentSequence};
use crate::numerics::{bisect_root, BigReal, NumericsError};
use crate::polyring::Polynomial;

/// Default cap on the total degree of `f^k` expanded for push-forward moments.
pub const DEFAULT_DEGREE_CAP: u32 = 400;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PushforwardError {
    #[error("push-forward moment needs degree {needed}, above the budget of {cap}")]
    DegreeBudgetExceeded { needed: u64, cap: u32 },
    #[error("could not invert g at x = {x}")]
    InversionFailed { x: f64 },
    #[error("invalid density parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Moments of the push-forward `f_#μ` of a base measure, memoized by order.
pub struct PushforwardMoments {
    f: Polynomial,
    base: Arc<MomentSequence>,
    degree_cap: u32,
    state: Mutex<PfState>,
}

struct PfState {
    /// `powers[k] = f^k`.
    powers: Vec<Polynomial>,
    moments: Vec<BigReal>,
}

impl fmt::Debug for PushforwardMoments {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PushforwardMoments")
            .field("f", &self.f.to_string())
            .field("base", &self.base)
            .field("degree_cap", &self.degree_cap)
            .finish()
    }
}

impl PushforwardMoments {
    pub fn new(f: Polynomial, base: Arc<MomentSequence>) -> Self {
        Self::with_degree_cap(f, base, DEFAULT_DEGREE_CAP)
    }

    pub fn with_degree_cap(f: Polynomial, base: Arc<MomentSequence>, degree_cap: u32) -> Self {
        let p = base.precision();
        let f = f.with_precision(p);
        let one = Polynomial::constant(BigReal::one(p), f.n_vars());
        Self { f, base, degree_cap, state: Mutex::new(PfState { powers: vec![one], moments: Vec::new() }) }
    }

    pub fn f(&self) -> &Polynomial {
        &self.f
    }

    pub fn base(&self) -> &Arc<MomentSequence> {
        &self.base
    }

    pub fn precision(&self) -> usize {
        self.base.precision()
    }

    /// `∫ f^k dμ`.
    pub fn pf_moment(&self, k: u32) -> Result<BigReal, PushforwardError> {
        let needed = self.f.degree().unwrap_or(0) as u64 * k as u64;
        if needed > self.degree_cap as u64 {
            return Err(PushforwardError::DegreeBudgetExceeded { needed, cap: self.degree_cap });
        }
        let mut state = self.state.lock().expect("push-forward cache poisoned");
        while state.moments.len() <= k as usize {
            let j = state.moments.len();
            while state.powers.len() <= j {
                let next = state
                    .powers
                    .last()
                    .expect("f^0 present")
                    .mul(&self.f)
                    .map_err(|e| PushforwardError::Invalid(e.to_string()))?;
                state.powers.push(next);
            }
            let m = self.base.integrate_poly(&state.powers[j])?;
            state.moments.push(m);
        }
        Ok(state.moments[k as usize].clone())
    }

    /// `f^k` as expanded for the moment computation.
    pub fn power(&self, k: u32) -> Result<Polynomial, PushforwardError> {
        self.pf_moment(k)?;
        let state = self.state.lock().expect("push-forward cache poisoned");
        Ok(state.powers[k as usize].clone())
    }
}

/// Density of `(x ↦ x²)_#Γ_β` at `x > 0`: `C_β·exp(−x^{β/2})/√x`.
pub fn density_f_sq(beta: &BigReal, x: &BigReal) -> Result<BigReal, PushforwardError> {
    if !x.is_positive() {
        return Err(NumericsError::Domain(format!("density_f_sq needs x > 0, got {}", x.to_f64())).into());
    }
    if !beta.is_positive() {
        return Err(PushforwardError::Invalid("beta must be positive".into()));
    }
    let c = gamma_alpha_normalizer(beta)?;
    let half_beta = beta.mul_pow2(-1);
    Ok(c * (-x.powf(&half_beta)).exp() / x.sqrt())
}

/// An even univariate polynomial `g` with `g(0) = 0` and non-negative coefficients, pushed
/// through `Γ_α`. Such `g` is strictly increasing on `x > 0`, so it has a unique positive inverse.
#[derive(Clone, Debug)]
pub struct EvenPolyDensity {
    g: Polynomial,
    g_prime: Polynomial,
    alpha: BigReal,
    normalizer: BigReal,
}

impl EvenPolyDensity {
    pub fn new(g: Polynomial, alpha: BigReal) -> Result<Self, PushforwardError> {
        if g.n_vars() != 1 {
            return Err(PushforwardError::Invalid("g must be univariate".into()));
        }
        if !alpha.is_positive() {
            return Err(PushforwardError::Invalid("alpha must be positive".into()));
        }
        let mut any_positive = false;
        for (idx, c) in g.terms() {
            let k = idx.exponents()[0];
            if k == 0 {
                return Err(PushforwardError::Invalid("g must vanish at the origin".into()));
            }
            if k % 2 == 1 {
                return Err(PushforwardError::Invalid(format!("g has an odd-degree term x^{k}")));
            }
            if c.is_negative() {
                return Err(PushforwardError::Invalid(format!("g has a negative coefficient on x^{k}")));
            }
            any_positive |= c.is_positive();
        }
        if !any_positive {
            return Err(PushforwardError::Invalid("g must have a positive coefficient".into()));
        }
        let p = alpha.precision().max(g.precision());
        let g = g.with_precision(p);
        let alpha = alpha.with_precision(p);
        let normalizer = gamma_alpha_normalizer(&alpha)?;
        let g_prime = g.derivative(0);
        Ok(Self { g, g_prime, alpha, normalizer })
    }

    /// `g(x) = x² + x^{2d}`.
    pub fn quadratic_plus_power(alpha: BigReal, d: u32) -> Result<Self, PushforwardError> {
        let p = alpha.precision();
        let g = Polynomial::univariate_terms(&[(2, BigReal::one(p)), (2 * d, BigReal::one(p))], 1);
        Self::new(g, alpha)
    }

    pub fn g(&self) -> &Polynomial {
        &self.g
    }

    pub fn alpha(&self) -> &BigReal {
        &self.alpha
    }

    pub fn precision(&self) -> usize {
        self.alpha.precision()
    }

    /// `C_α`.
    pub fn normalizer(&self) -> &BigReal {
        &self.normalizer
    }

    pub fn g_prime_at(&self, y: &BigReal) -> BigReal {
        self.g_prime.eval_univariate(y)
    }

    /// The unique `y > 0` with `g(y) = x`, by bisection to `2^(-P/2)`.
    pub fn inverse(&self, x: &BigReal) -> Result<BigReal, PushforwardError> {
        if !x.is_positive() {
            return Err(PushforwardError::InversionFailed { x: x.to_f64() });
        }
        let p = self.precision();
        let x = x.with_precision(p);
        let lo = BigReal::zero(p);
        let mut hi = x.clone().max(BigReal::one(p));
        let mut tries = 0;
        while self.g.eval_univariate(&hi) < x {
            hi = hi.mul_pow2(1);
            tries += 1;
            if tries > 4096 {
                return Err(PushforwardError::InversionFailed { x: x.to_f64() });
            }
        }
        let tol = BigReal::pow2(-((p / 2) as i64), p);
        bisect_root(|y| self.g.eval_univariate(y) - &x, &lo, &hi, &tol)
            .map_err(|_| PushforwardError::InversionFailed { x: x.to_f64() })
    }

    /// Density of `g_#Γ_α` at `x > 0`: `2·w_α(y)/g′(y)` with `y = g⁻¹(x)`.
    pub fn density(&self, x: &BigReal) -> Result<BigReal, PushforwardError> {
        let y = self.inverse(x)?;
        Ok(self.density_at_preimage(&y))
    }

    fn density_at_preimage(&self, y: &BigReal) -> BigReal {
        let w = &self.normalizer * (-y.abs().powf(&self.alpha)).exp();
        w.mul_pow2(1) / self.g_prime_at(y)
    }
}

/// Density of `g_#Γ_α` at `x`.
pub fn density_g(pd: &EvenPolyDensity, x: &BigReal) -> Result<BigReal, PushforwardError> {
    pd.density(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridSpacing {
    Log,
    Linear,
}

/// Sampling plan over `(lo, hi]`: `points` nodes, the first just above `lo`, the last at `hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub spacing: GridSpacing,
}

impl Default for DensityGrid {
    fn default() -> Self {
        Self { lo: 1e-6, hi: 1e6, points: 2000, spacing: GridSpacing::Log }
    }
}

impl DensityGrid {
    pub fn nodes(&self, precision: usize) -> Vec<BigReal> {
        let n = self.points.max(1);
        let lo = BigReal::from_f64(self.lo, precision);
        let hi = BigReal::from_f64(self.hi, precision);
        match self.spacing {
            GridSpacing::Log => {
                let log_lo = lo.ln();
                let span = hi.ln() - &log_lo;
                (1..=n)
                    .map(|i| {
                        if i == n {
                            hi.clone()
                        } else {
                            (&log_lo + &span * BigReal::from_ratio(i as i64, n as i64, precision)).exp()
                        }
                    })
                    .collect()
            }
            GridSpacing::Linear => {
                let span = &hi - &lo;
                (1..=n).map(|i| &lo + &span * BigReal::from_ratio(i as i64, n as i64, precision)).collect()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensitySample {
    pub x: BigReal,
    /// `(x²)_#w_β(x)`.
    pub f_density: BigReal,
    /// `g_#w_α(x)`.
    pub g_density: BigReal,
    /// `g⁻¹(x)`.
    pub g_inverse: BigReal,
    /// `g′(g⁻¹(x))`, the reciprocal of `(g⁻¹)′(x)`.
    pub g_prime_at_inverse: BigReal,
}

impl DensitySample {
    /// `f_#w_β / g_#w_α`.
    pub fn ratio_f_over_g(&self) -> BigReal {
        &self.f_density / &self.g_density
    }

    /// `g_#w_α / f_#w_β`.
    pub fn ratio_g_over_f(&self) -> BigReal {
        &self.g_density / &self.f_density
    }
}

/// Empirical density-sandwich constants between `g_#Γ_α` and `(x²)_#Γ_β`.
#[derive(Clone, Debug)]
pub struct DensityCompareReport {
    pub alpha: BigReal,
    pub beta: BigReal,
    pub g: Polynomial,
    /// `d` when `g = x² + x^{2d}` (with `d = 1` meaning `g = x²`).
    pub d: Option<u32>,
    pub grid: DensityGrid,
    /// `min f_#w_β/g_#w_α` over grid points in `(0, 1]`.
    pub c1: BigReal,
    pub c1_at: BigReal,
    /// `min g_#w_α/f_#w_β` over the whole grid.
    pub c2: BigReal,
    pub c2_at: BigReal,
    /// `g_#w_α/f_#w_β` is non-decreasing over the top decade of the grid.
    pub r2_tail_increasing: bool,
    pub samples: Vec<DensitySample>,
}

/// Evaluates both densities on `grid` and extracts `c₁`, `c₂` with their locations.
pub fn density_compare_report(
    g: &EvenPolyDensity,
    beta: &BigReal,
    grid: &DensityGrid,
) -> Result<DensityCompareReport, PushforwardError> {
    if !beta.is_positive() {
        return Err(PushforwardError::Invalid("beta must be positive".into()));
    }
    if !(grid.lo >= 0.0 && grid.hi > grid.lo && grid.points >= 1) {
        return Err(PushforwardError::Invalid("grid needs 0 ≤ lo < hi and at least one point".into()));
    }
    let p = g.precision();
    let beta = beta.with_precision(p);
    let nodes = grid.nodes(p);
    let samples: Vec<DensitySample> = nodes
        .par_iter()
        .map(|x| -> Result<DensitySample, PushforwardError> {
            let y = g.inverse(x)?;
            let g_prime = g.g_prime_at(&y);
            let g_density = g.density_at_preimage(&y);
            let f_density = density_f_sq(&beta, x)?;
            Ok(DensitySample { x: x.clone(), f_density, g_density, g_inverse: y, g_prime_at_inverse: g_prime })
        })
        .collect::<Result<_, _>>()?;

    let one = BigReal::one(p);
    let mut c1: Option<(BigReal, BigReal)> = None;
    let mut c2: Option<(BigReal, BigReal)> = None;
    for s in &samples {
        if s.x <= one {
            let r1 = s.ratio_f_over_g();
            if c1.as_ref().is_none_or(|(v, _)| r1 < *v) {
                c1 = Some((r1, s.x.clone()));
            }
        }
        let r2 = s.ratio_g_over_f();
        if c2.as_ref().is_none_or(|(v, _)| r2 < *v) {
            c2 = Some((r2, s.x.clone()));
        }
    }
    let (c1, c1_at) = c1.ok_or_else(|| PushforwardError::Invalid("grid has no point in (0, 1]".into()))?;
    let (c2, c2_at) = c2.expect("non-empty grid");
    let tail_start = BigReal::from_f64(grid.hi / 10.0, p);
    let tail: Vec<BigReal> = samples.iter().filter(|s| s.x >= tail_start).map(DensitySample::ratio_g_over_f).collect();
    let r2_tail_increasing = tail.len() >= 2 && tail.windows(2).all(|w| w[1] >= w[0]);
    Ok(DensityCompareReport {
        alpha: g.alpha().clone(),
        beta,
        g: g.g().clone(),
        d: None,
        grid: grid.clone(),
        c1,
        c1_at,
        c2,
        c2_at,
        r2_tail_increasing,
        samples,
    })
}

/// Compares `g_#Γ_α` for `g = x² + x^{2d}` against `(x²)_#Γ_β`, after checking the parameters.
/// `d = 1` is the degenerate case `g = x²`, where no parameter constraints apply.
pub fn lemma_density_compare(
    alpha: &BigReal,
    d: u32,
    beta: &BigReal,
    grid: &DensityGrid,
) -> Result<DensityCompareReport, PushforwardError> {
    let pd = if d == 1 {
        let g = Polynomial::univariate_terms(&[(2, BigReal::one(alpha.precision()))], 1);
        EvenPolyDensity::new(g, alpha.clone())?
    } else {
        check_lemma_parameters(alpha.to_f64(), d, beta.to_f64())?;
        EvenPolyDensity::quadratic_plus_power(alpha.clone(), d)?
    };
    let mut report = density_compare_report(&pd, beta, grid)?;
    report.d = Some(d);
    Ok(report)
}

/// Checks `d > α`, `β ∈ (0, 1)` and the tail condition `β/2 > 1/2 − δ` where
/// `1/2 − δ = (α/(2d) + 1/2)/2` sits halfway between the decay exponent `α/(2d)` of `g_#w_α`
/// and `1/2`.
pub fn check_lemma_parameters(alpha: f64, d: u32, beta: f64) -> Result<(), PushforwardError> {
    if !(alpha > 0.0) {
        return Err(PushforwardError::Invalid("alpha must be positive".into()));
    }
    if !(d as f64 > alpha) {
        return Err(PushforwardError::Invalid(format!("need d > alpha, got d = {d}, alpha = {alpha}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(PushforwardError::Invalid(format!("beta must lie in (0, 1), got {beta}")));
    }
    let half_minus_delta = lemma_tail_exponent(alpha, d);
    if !(beta / 2.0 > half_minus_delta) {
        return Err(PushforwardError::Invalid(format!(
            "beta/2 = {} does not exceed the tail exponent {half_minus_delta}",
            beta / 2.0
        )));
    }
    Ok(())
}

/// `1/2 − δ = (α/(2d) + 1/2)/2`.
pub fn lemma_tail_exponent(alpha: f64, d: u32) -> f64 {
    (alpha / (2.0 * d as f64) + 0.5) / 2.0
}

/// Violation counts for the intermediate inequalities behind the density sandwich with
/// `g = x² + x^{2d}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LemmaBracketCheck {
    /// Grid points in `(0, 1]`.
    pub interval_points: usize,
    /// Grid points in `[1, ∞)`.
    pub outer_points: usize,
    /// `½√x ≤ g⁻¹(x) ≤ √x` fails.
    pub inverse_violations: usize,
    /// `1/((2d+2)√x) ≤ (g⁻¹)′(x) ≤ 1/√x` fails.
    pub derivative_violations: usize,
    /// `2C_α/((2d+2)e√x) ≤ g_#w_α(x) ≤ 2C_α/√x` fails.
    pub density_violations: usize,
    /// `g_#w_α(x) ≥ 2C_α·exp(−x^{α/(2d)})/((2d+2)x)` fails for `x ≥ 1`.
    pub outer_violations: usize,
}

impl LemmaBracketCheck {
    pub fn all_hold(&self) -> bool {
        self.inverse_violations == 0
            && self.derivative_violations == 0
            && self.density_violations == 0
            && self.outer_violations == 0
    }
}

pub fn lemma_bracket_check(report: &DensityCompareReport, d: u32) -> Result<LemmaBracketCheck, PushforwardError> {
    let alpha = &report.alpha;
    let p = alpha.precision();
    let c_alpha = gamma_alpha_normalizer(alpha)?;
    let one = BigReal::one(p);
    let e = one.exp();
    let two_d_plus_two = BigReal::from_u64(2 * d as u64 + 2, p);
    let decay = alpha / BigReal::from_u64(2 * d as u64, p);
    // Slack for quantities that coincide with a bound at x = 1 or in the limit x → 0.
    let slack = BigReal::pow2(-((p / 2) as i64) + 16, p);
    let le = |a: &BigReal, b: &BigReal| *a <= b + &(b.abs() * &slack);
    let mut out = LemmaBracketCheck::default();
    for s in &report.samples {
        let x = &s.x;
        let sqrt_x = x.sqrt();
        if *x <= one {
            out.interval_points += 1;
            if !(le(&sqrt_x.mul_pow2(-1), &s.g_inverse) && le(&s.g_inverse, &sqrt_x)) {
                out.inverse_violations += 1;
            }
            let deriv = s.g_prime_at_inverse.recip();
            let lower = (&two_d_plus_two * &sqrt_x).recip();
            let upper = sqrt_x.recip();
            if !(le(&lower, &deriv) && le(&deriv, &upper)) {
                out.derivative_violations += 1;
            }
            let upper = c_alpha.mul_pow2(1) / &sqrt_x;
            let lower = c_alpha.mul_pow2(1) / (&two_d_plus_two * &e * &sqrt_x);
            if !(le(&lower, &s.g_density) && le(&s.g_density, &upper)) {
                out.density_violations += 1;
            }
        }
        if *x >= one {
            out.outer_points += 1;
            let bound = c_alpha.mul_pow2(1) * (-x.powf(&decay)).exp() / (&two_d_plus_two * x);
            if !le(&bound, &s.g_density) {
                out.outer_violations += 1;
            }
        }
    }
    Ok(out)
}
