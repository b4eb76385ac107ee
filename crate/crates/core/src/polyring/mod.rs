//! Sparse multivariate polynomials with `BigReal` coefficients.
//!
//! Monomials are keyed by [`MultiIndex`] and kept in graded-lexicographic order, so iteration order,
//! printing and moment-matrix bases are canonical.

mod parse;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::numerics::BigReal;

pub use parse::ParseError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolyError {
    #[error("polynomials live in different rings ({left} vs {right} variables)")]
    VarMismatch { left: usize, right: usize },
    #[error("point has {got} coordinates, polynomial has {expected} variables")]
    DimMismatch { expected: usize, got: usize },
    #[error("scale factor must be non-zero")]
    ZeroScale,
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(n_vars: usize) -> Self {
        Self(vec![0; n_vars])
    }

    /// `x_var^power` in `n_vars` variables (`var` is 0-based).
    pub fn unit(n_vars: usize, var: usize, power: u32) -> Self {
        let mut e = vec![0; n_vars];
        e[var] = power;
        Self(e)
    }

    pub fn n_vars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Exponent-wise sum (monomial product).
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.0.len(), other.0.len());
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All multi-indices of total degree ≤ `max_degree`, ascending in graded-lex order.
    pub fn all_up_to(n_vars: usize, max_degree: u32) -> Vec<Self> {
        let mut out = Vec::new();
        for d in 0..=max_degree {
            let mut level = Vec::new();
            compositions(n_vars, d, &mut Vec::with_capacity(n_vars), &mut level);
            level.sort();
            out.extend(level);
        }
        out
    }
}

fn compositions(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        prefix.push(remaining);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    if n == 0 {
        return;
    }
    for e in 0..=remaining {
        prefix.push(e);
        compositions(n, remaining - e, prefix, out);
        prefix.pop();
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial in `n_vars` variables. Zero coefficients are never stored.
#[derive(Clone, Debug)]
pub struct Polynomial {
    n_vars: usize,
    terms: BTreeMap<MultiIndex, BigReal>,
}

impl Polynomial {
    pub fn zero(n_vars: usize) -> Self {
        Self { n_vars, terms: BTreeMap::new() }
    }

    pub fn constant(c: BigReal, n_vars: usize) -> Self {
        Self::monomial(MultiIndex::zero(n_vars), c)
    }

    pub fn monomial(idx: MultiIndex, c: BigReal) -> Self {
        let n_vars = idx.n_vars();
        let mut p = Self::zero(n_vars);
        p.add_term(idx, c);
        p
    }

    /// The coordinate `x_{var+1}` (0-based `var`).
    pub fn var(var: usize, n_vars: usize, precision: usize) -> Self {
        Self::monomial(MultiIndex::unit(n_vars, var, 1), BigReal::one(precision))
    }

    /// Univariate polynomial from coefficients in ascending degree.
    pub fn univariate(coeffs: &[BigReal]) -> Self {
        let mut p = Self::zero(1);
        for (k, c) in coeffs.iter().enumerate() {
            p.add_term(MultiIndex::new(vec![k as u32]), c.clone());
        }
        p
    }

    /// `Σ c_k x₁^k` for the given `(power, coefficient)` pairs, in `n_vars` variables.
    pub fn univariate_terms(terms: &[(u32, BigReal)], n_vars: usize) -> Self {
        let mut p = Self::zero(n_vars);
        for (k, c) in terms {
            p.add_term(MultiIndex::unit(n_vars, 0, *k), c.clone());
        }
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total degree; `None` for the zero polynomial (degree −∞).
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::degree).max()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &BigReal)> {
        self.terms.iter()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Option<&BigReal> {
        self.terms.get(idx)
    }

    pub fn precision(&self) -> usize {
        self.terms.values().map(BigReal::precision).max().unwrap_or(64)
    }

    /// Rounds every coefficient to `precision` bits.
    pub fn with_precision(&self, precision: usize) -> Self {
        Self {
            n_vars: self.n_vars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v.with_precision(precision))).collect(),
        }
    }

    /// Adds `c·x^idx`, dropping the term if it cancels to zero.
    pub fn add_term(&mut self, idx: MultiIndex, c: BigReal) {
        assert_eq!(idx.n_vars(), self.n_vars, "multi-index arity");
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&idx) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&idx);
                }
            }
            None => {
                self.terms.insert(idx, c);
            }
        }
    }

    fn check_ring(&self, other: &Self) -> Result<(), PolyError> {
        if self.n_vars != other.n_vars {
            return Err(PolyError::VarMismatch { left: self.n_vars, right: other.n_vars });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_ring(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), v.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_ring(other)?;
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), -v);
        }
        Ok(out)
    }

    pub fn scale(&self, c: &BigReal) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    /// Coefficient convolution.
    pub fn mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_ring(other)?;
        let mut acc: BTreeMap<MultiIndex, BigReal> = BTreeMap::new();
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let k = ka.add(kb);
                let prod = va * vb;
                match acc.get_mut(&k) {
                    Some(e) => *e += prod,
                    None => {
                        acc.insert(k, prod);
                    }
                }
            }
        }
        acc.retain(|_, v| !v.is_zero());
        Ok(Self { n_vars: self.n_vars, terms: acc })
    }

    /// `self^k` by repeated squaring; `self^0 = 1`.
    pub fn pow(&self, k: u32) -> Self {
        let p = self.precision();
        let mut result = Self::constant(BigReal::one(p), self.n_vars);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base).expect("same ring");
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        result
    }

    pub fn eval(&self, point: &[BigReal]) -> Result<BigReal, PolyError> {
        if point.len() != self.n_vars {
            return Err(PolyError::DimMismatch { expected: self.n_vars, got: point.len() });
        }
        let p = self.precision().max(point.iter().map(BigReal::precision).max().unwrap_or(64));
        let mut total = BigReal::zero(p);
        for (k, c) in &self.terms {
            let mut term = c.clone();
            for (x, &e) in point.iter().zip(k.exponents()) {
                if e > 0 {
                    term *= x.powi(e);
                }
            }
            total += term;
        }
        Ok(total)
    }

    /// Horner evaluation of a univariate polynomial at `x`.
    pub fn eval_univariate(&self, x: &BigReal) -> BigReal {
        assert_eq!(self.n_vars, 1, "eval_univariate on a multivariate polynomial");
        let Some(deg) = self.degree() else {
            return BigReal::zero(x.precision());
        };
        let mut acc = BigReal::zero(x.precision().max(self.precision()));
        for k in (0..=deg).rev() {
            acc *= x;
            if let Some(c) = self.terms.get(&MultiIndex::new(vec![k])) {
                acc += c;
            }
        }
        acc
    }

    /// `q(x) = p(c·x)`: the coefficient of `x^α` is multiplied by `c^|α|`.
    pub fn scale_variables(&self, c: &BigReal) -> Result<Self, PolyError> {
        if c.is_zero() {
            return Err(PolyError::ZeroScale);
        }
        let mut out = Self::zero(self.n_vars);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c.powi(k.degree()));
        }
        Ok(out)
    }

    /// Partial derivative with respect to the 0-based variable `var`.
    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.n_vars);
        for (k, v) in &self.terms {
            let e = k.exponents()[var];
            if e == 0 {
                continue;
            }
            let mut ex = k.exponents().to_vec();
            ex[var] -= 1;
            out.add_term(MultiIndex::new(ex), v * v.lift(e as i64));
        }
        out
    }

    /// `s ∘ self` for a univariate `s`.
    pub fn compose_into(&self, s: &Polynomial) -> Result<Self, PolyError> {
        if s.n_vars != 1 {
            return Err(PolyError::VarMismatch { left: 1, right: s.n_vars });
        }
        let p = self.precision().max(s.precision());
        let mut out = Self::zero(self.n_vars);
        let mut power = Self::constant(BigReal::one(p), self.n_vars);
        let deg = s.degree().unwrap_or(0);
        for k in 0..=deg {
            if let Some(c) = s.terms.get(&MultiIndex::new(vec![k])) {
                out = out.add(&power.scale(c))?;
            }
            if k < deg {
                power = power.mul(self)?;
            }
        }
        Ok(out)
    }

    /// Embeds a polynomial into a ring with more variables (new variables appended).
    pub fn embed(&self, n_vars: usize) -> Self {
        assert!(n_vars >= self.n_vars);
        let mut out = Self::zero(n_vars);
        for (k, v) in &self.terms {
            let mut e = k.exponents().to_vec();
            e.resize(n_vars, 0);
            out.add_term(MultiIndex::new(e), v.clone());
        }
        out
    }

    /// Parses text such as `x1^2 + 3.5*x1^4*x2` into a polynomial in `n_vars` variables.
    pub fn parse(text: &str, n_vars: usize, precision: usize) -> Result<Self, PolyError> {
        Ok(parse::parse_polynomial(text, n_vars, precision)?)
    }

    /// Number of variables referenced by the text (largest `xi` index), without building it.
    pub fn count_vars(text: &str) -> Result<usize, PolyError> {
        Ok(parse::count_vars(text)?)
    }
}

impl PartialEq for Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.n_vars == other.n_vars && self.terms == other.terms
    }
}

fn format_coeff(c: &BigReal) -> String {
    let abs = c.abs();
    let is_int = abs.to_f64() < 1e15 && abs.to_f64().fract() == 0.0 && {
        let r = BigReal::from_f64(abs.to_f64(), abs.precision());
        r == abs
    };
    if is_int {
        format!("{}", abs.to_f64() as u64)
    } else {
        abs.to_decimal_string(20)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (k, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let coeff = format_coeff(c);
            let vars: Vec<String> = k
                .exponents()
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(v, &e)| if e == 1 { format!("x{}", v + 1) } else { format!("x{}^{}", v + 1, e) })
                .collect();
            if vars.is_empty() {
                f.write_str(&coeff)?;
            } else {
                if coeff != "1" {
                    write!(f, "{coeff}*")?;
                }
                f.write_str(&vars.join("*"))?;
            }
        }
        Ok(())
    }
}
