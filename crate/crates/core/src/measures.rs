//! Probability measures with exact moment oracles: the exponential family `Γ_α` on ℝⁿ (density
//! `C_α·exp(−Σ|x_i|^α)`) and the uniform probability measure on an axis-aligned box.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use crate::numerics::{gamma_fn, BigReal, NumericsError};
use crate::polyring::{MultiIndex, Polynomial};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("index has {got} coordinates, measure lives on ℝ^{expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid measure: {0}")]
    Invalid(String),
    #[error("cannot parse measure {text:?}: {reason}")]
    Parse { text: String, reason: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug)]
pub enum MeasureSpec {
    /// `Γ_α` on ℝⁿ: product of univariate laws with density `C_α·exp(−|x|^α)`.
    GammaAlpha { alpha: BigReal, n_vars: usize },
    /// Uniform probability measure on `Π [lo_i, hi_i]`.
    UniformBox { bounds: Vec<(BigReal, BigReal)> },
}

impl MeasureSpec {
    pub fn gamma(alpha: BigReal, n_vars: usize) -> Result<Self, MeasureError> {
        if !alpha.is_positive() || !alpha.is_finite() {
            return Err(MeasureError::Invalid(format!("alpha must be positive, got {}", alpha.to_f64())));
        }
        if n_vars == 0 {
            return Err(MeasureError::Invalid("need at least one variable".into()));
        }
        Ok(Self::GammaAlpha { alpha, n_vars })
    }

    pub fn uniform_box(bounds: Vec<(BigReal, BigReal)>) -> Result<Self, MeasureError> {
        if bounds.is_empty() {
            return Err(MeasureError::Invalid("box needs at least one coordinate".into()));
        }
        for (i, (lo, hi)) in bounds.iter().enumerate() {
            if !(lo < hi) {
                return Err(MeasureError::Invalid(format!(
                    "coordinate {}: lower bound {} is not below upper bound {}",
                    i + 1,
                    lo.to_f64(),
                    hi.to_f64()
                )));
            }
        }
        Ok(Self::UniformBox { bounds })
    }

    pub fn n_vars(&self) -> usize {
        match self {
            Self::GammaAlpha { n_vars, .. } => *n_vars,
            Self::UniformBox { bounds } => bounds.len(),
        }
    }

    /// Parses `gamma:alpha=2,n=1` or `box:-1..1,0..2` (one range per coordinate).
    pub fn parse(text: &str, precision: usize) -> Result<Self, MeasureError> {
        let fail = |reason: &str| MeasureError::Parse { text: text.to_string(), reason: reason.to_string() };
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let (kind, args) = compact.split_once(':').ok_or_else(|| fail("expected `kind:arguments`"))?;
        match kind {
            "gamma" => {
                let mut alpha = None;
                let mut n = 1usize;
                for kv in args.split(',').filter(|s| !s.is_empty()) {
                    let (k, v) = kv.split_once('=').ok_or_else(|| fail("expected key=value"))?;
                    match k {
                        "alpha" => alpha = Some(BigReal::parse(v, precision).map_err(|_| fail("bad alpha"))?),
                        "n" => n = v.parse().map_err(|_| fail("bad n"))?,
                        _ => return Err(fail(&format!("unknown key {k:?}"))),
                    }
                }
                let alpha = alpha.ok_or_else(|| fail("missing alpha"))?;
                Self::gamma(alpha, n)
            }
            "box" => {
                let mut bounds = Vec::new();
                for range in args.split(',') {
                    let (lo, hi) = range.split_once("..").ok_or_else(|| fail("expected lo..hi"))?;
                    let lo = BigReal::parse(lo, precision).map_err(|_| fail("bad lower bound"))?;
                    let hi = BigReal::parse(hi, precision).map_err(|_| fail("bad upper bound"))?;
                    bounds.push((lo, hi));
                }
                Self::uniform_box(bounds)
            }
            _ => Err(fail("unknown measure kind (expected `gamma` or `box`)")),
        }
    }
}

fn short(x: &BigReal) -> String {
    x.to_decimal_string(17)
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::GammaAlpha { alpha, n_vars } => write!(f, "gamma:alpha={},n={}", short(alpha), n_vars),
            Self::UniformBox { bounds } => {
                let parts: Vec<String> =
                    bounds.iter().map(|(lo, hi)| format!("{}..{}", short(lo), short(hi))).collect();
                write!(f, "box:{}", parts.join(","))
            }
        }
    }
}

/// Normalized moment `∫ x^k dΓ_α(x)` on ℝ: zero for odd `k`, `Γ((k+1)/α)/Γ(1/α)` for even `k`.
///
/// Computed at the precision of `alpha`.
pub fn gamma_alpha_moment(alpha: &BigReal, k: u32) -> Result<BigReal, NumericsError> {
    let p = alpha.precision();
    if k % 2 == 1 {
        return Ok(BigReal::zero(p));
    }
    if k == 0 {
        return Ok(BigReal::one(p));
    }
    let inv = alpha.recip();
    let num = gamma_fn(&(BigReal::from_u64(k as u64 + 1, p) * &inv))?;
    let den = gamma_fn(&inv)?;
    Ok(num / den)
}

/// Normalizing constant `C_α = 1/(2Γ(1 + 1/α))` of the univariate density.
pub fn gamma_alpha_normalizer(alpha: &BigReal) -> Result<BigReal, NumericsError> {
    let one = alpha.lift(1);
    let g = gamma_fn(&(&one + alpha.recip()))?;
    Ok((g.mul_pow2(1)).recip())
}

/// Univariate density `C_α·exp(−|x|^α)`.
pub fn density_w_alpha(alpha: &BigReal, x: &BigReal) -> Result<BigReal, NumericsError> {
    let c = gamma_alpha_normalizer(alpha)?;
    Ok(c * (-x.abs().powf(alpha)).exp())
}

/// Memoized moments of a [`MeasureSpec`] at a fixed working precision.
///
/// The cache only ever stores the value the closed form produces for a key, so concurrent callers
/// observe identical results regardless of interleaving.
pub struct MomentSequence {
    spec: MeasureSpec,
    precision: usize,
    univariate: Mutex<HashMap<(usize, u32), BigReal>>,
    cache: Mutex<HashMap<MultiIndex, BigReal>>,
}

impl fmt::Debug for MomentSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentSequence")
            .field("spec", &self.spec.to_string())
            .field("precision", &self.precision)
            .finish()
    }
}

impl MomentSequence {
    pub fn new(spec: MeasureSpec, precision: usize) -> Self {
        Self { spec, precision, univariate: Mutex::new(HashMap::new()), cache: Mutex::new(HashMap::new()) }
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    pub fn n_vars(&self) -> usize {
        self.spec.n_vars()
    }

    /// `∫ x_coord^k dμ_coord` for the coordinate marginal.
    fn univariate_moment(&self, coord: usize, k: u32) -> Result<BigReal, MeasureError> {
        let key = match self.spec {
            // Every coordinate of Γ_α shares the same marginal.
            MeasureSpec::GammaAlpha { .. } => (0, k),
            MeasureSpec::UniformBox { .. } => (coord, k),
        };
        if let Some(v) = self.univariate.lock().expect("moment cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let p = self.precision;
        let value = match &self.spec {
            MeasureSpec::GammaAlpha { alpha, .. } => gamma_alpha_moment(&alpha.with_precision(p), k)?,
            MeasureSpec::UniformBox { bounds } => {
                let (lo, hi) = &bounds[coord];
                let (lo, hi) = (lo.with_precision(p), hi.with_precision(p));
                let kk = k + 1;
                (hi.powi(kk) - lo.powi(kk)) / (BigReal::from_u64(kk as u64, p) * (&hi - &lo))
            }
        };
        self.univariate.lock().expect("moment cache poisoned").entry(key).or_insert_with(|| value.clone());
        Ok(value)
    }

    /// `∫ x^idx dμ`, the product of coordinate moments.
    pub fn moment(&self, idx: &MultiIndex) -> Result<BigReal, MeasureError> {
        if idx.n_vars() != self.n_vars() {
            return Err(MeasureError::DimMismatch { expected: self.n_vars(), got: idx.n_vars() });
        }
        if let Some(v) = self.cache.lock().expect("moment cache poisoned").get(idx) {
            return Ok(v.clone());
        }
        let mut value = BigReal::one(self.precision);
        for (coord, &k) in idx.exponents().iter().enumerate() {
            if k == 0 {
                continue;
            }
            let m = self.univariate_moment(coord, k)?;
            if m.is_zero() {
                value = BigReal::zero(self.precision);
                break;
            }
            value *= m;
        }
        self.cache.lock().expect("moment cache poisoned").entry(idx.clone()).or_insert_with(|| value.clone());
        Ok(value)
    }

    /// `∫ p dμ = Σ_α p_α·m_α`.
    pub fn integrate_poly(&self, p: &Polynomial) -> Result<BigReal, MeasureError> {
        if p.n_vars() != self.n_vars() {
            return Err(MeasureError::DimMismatch { expected: self.n_vars(), got: p.n_vars() });
        }
        let mut total = BigReal::zero(self.precision);
        for (idx, c) in p.terms() {
            let m = self.moment(idx)?;
            if !m.is_zero() {
                total += c * m;
            }
        }
        Ok(total)
    }
}
