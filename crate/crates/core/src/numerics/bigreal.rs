//! Arbitrary-precision real scalar.
//!
//! `BigReal` wraps an `astro_float::BigFloat` together with its working precision. Binary
//! operations run at the larger of the two operand precisions and round to nearest-even, so the
//! result of any expression is a deterministic function of its inputs and their precisions.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};

use super::NumericsError;

/// Smallest supported working precision, in bits.
pub const MIN_PRECISION_BITS: usize = 64;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("allocate constant cache"));
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Evaluates a transcendental function without astro-float's correct-rounding retry loop, which
/// can escalate precision without bound on exactly representable results, then rounds to `p`.
fn guarded(p: usize, f: impl FnOnce(usize, &mut Consts) -> BigFloat) -> BigFloat {
    let mut v = with_consts(|cc| f(p + GUARD_BITS, cc));
    // Only fails for inputs that are not finite numbers, which are passed through unchanged.
    let _ = v.set_precision(p, RM);
    v
}

const GUARD_BITS: usize = 64;

fn clamp_precision(bits: usize) -> usize {
    bits.max(MIN_PRECISION_BITS)
}

/// Arbitrary-precision floating-point real number.
#[derive(Clone)]
pub struct BigReal {
    value: BigFloat,
    precision: usize,
}

impl BigReal {
    fn wrap(value: BigFloat, precision: usize) -> Self {
        Self { value, precision }
    }

    pub fn zero(precision: usize) -> Self {
        let p = clamp_precision(precision);
        Self::wrap(BigFloat::from_word(0, p), p)
    }

    pub fn one(precision: usize) -> Self {
        Self::from_i64(1, precision)
    }

    pub fn from_i64(v: i64, precision: usize) -> Self {
        let p = clamp_precision(precision);
        Self::wrap(BigFloat::from_i64(v, p), p)
    }

    pub fn from_u64(v: u64, precision: usize) -> Self {
        let p = clamp_precision(precision);
        Self::wrap(BigFloat::from_u64(v, p), p)
    }

    /// Exact conversion of a double (every finite `f64` is representable at ≥ 64 bits).
    pub fn from_f64(v: f64, precision: usize) -> Self {
        let p = clamp_precision(precision);
        Self::wrap(BigFloat::from_f64(v, p), p)
    }

    /// `num / den`, correctly rounded.
    pub fn from_ratio(num: i64, den: i64, precision: usize) -> Self {
        Self::from_i64(num, precision) / Self::from_i64(den, precision)
    }

    /// A value of the same precision as `self`.
    pub fn lift(&self, v: i64) -> Self {
        Self::from_i64(v, self.precision)
    }

    pub fn lift_f64(&self, v: f64) -> Self {
        Self::from_f64(v, self.precision)
    }

    /// Parses a decimal literal such as `-12`, `3.5`, `.25` or `1.5e-3`.
    ///
    /// The digit string is accumulated exactly and scaled by a single power of ten, so literals
    /// with a short decimal expansion (`0.5`, `0.9`) get one rounding step only.
    pub fn parse(text: &str, precision: usize) -> Result<Self, NumericsError> {
        let p = clamp_precision(precision);
        let bad = || NumericsError::Parse(text.to_string());
        let s = text.trim();
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let (mantissa, exponent) = match body.find(['e', 'E']) {
            Some(pos) => {
                let e: i64 = body[pos + 1..].parse().map_err(|_| bad())?;
                (&body[..pos], e)
            }
            None => (body, 0),
        };
        let (int_part, frac_part) = match mantissa.find('.') {
            Some(pos) => (&mantissa[..pos], &mantissa[pos + 1..]),
            None => (mantissa, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        // Exact digit accumulation needs roughly 3.33 bits per digit.
        let n_digits = int_part.len() + frac_part.len();
        let exact_bits = clamp_precision(p.max(n_digits * 4 + 64));
        let ten = BigFloat::from_word(10, exact_bits);
        let mut acc = BigFloat::from_word(0, exact_bits);
        for b in int_part.bytes().chain(frac_part.bytes()) {
            let d = BigFloat::from_word((b - b'0') as u64, exact_bits);
            acc = acc.mul(&ten, exact_bits, RM).add(&d, exact_bits, RM);
        }
        let scale = exponent - frac_part.len() as i64;
        let pow = ten.powi(scale.unsigned_abs() as usize, exact_bits + 64, RM);
        let mut value = if scale >= 0 { acc.mul(&pow, p, RM) } else { acc.div(&pow, p, RM) };
        value.set_precision(p, RM).map_err(|_| bad())?;
        if negative {
            value.inv_sign();
        }
        let out = Self::wrap(value, p);
        if out.is_finite() {
            Ok(out)
        } else {
            Err(bad())
        }
    }

    pub fn pi(precision: usize) -> Self {
        let p = clamp_precision(precision);
        Self::wrap(with_consts(|cc| cc.pi(p, RM)), p)
    }

    pub fn precision(&self) -> usize {
        self.precision
    }

    /// The same value rounded (or zero-extended) to `precision` bits.
    pub fn with_precision(&self, precision: usize) -> Self {
        let p = clamp_precision(precision);
        let mut v = self.value.clone();
        // Only fails on allocation failure, which is fatal elsewhere anyway.
        let _ = v.set_precision(p, RM);
        Self::wrap(v, p)
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.value.is_nan() && !self.value.is_inf()
    }

    pub fn is_negative(&self) -> bool {
        !self.is_zero() && self.value.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && self.value.is_positive()
    }

    pub fn abs(&self) -> Self {
        Self::wrap(self.value.abs(), self.precision)
    }

    pub fn sqrt(&self) -> Self {
        Self::wrap(self.value.sqrt(self.precision, RM), self.precision)
    }

    pub fn exp(&self) -> Self {
        let p = self.precision;
        if self.is_zero() {
            return Self::one(p);
        }
        Self::wrap(guarded(p, |q, cc| self.value.exp(q, RoundingMode::None, cc)), p)
    }

    pub fn ln(&self) -> Self {
        let p = self.precision;
        Self::wrap(guarded(p, |q, cc| self.value.ln(q, RoundingMode::None, cc)), p)
    }

    /// `self^e` for `self > 0`.
    pub fn powf(&self, e: &BigReal) -> Self {
        let p = self.precision.max(e.precision);
        if self.is_zero() {
            return if e.is_zero() { Self::one(p) } else { Self::zero(p) };
        }
        if let Some(n) = e.small_integer() {
            let r = self.with_precision(p).powi(n.unsigned_abs());
            return if n < 0 { r.recip() } else { r };
        }
        if let Some(n) = e.mul_pow2(1).small_integer() {
            let r = self.with_precision(p).sqrt().powi(n.unsigned_abs());
            return if n < 0 { r.recip() } else { r };
        }
        Self::wrap(guarded(p, |q, cc| self.value.pow(&e.value, q, RoundingMode::None, cc)), p)
    }

    /// `Some(n)` when `self` is an integer with `|n| < 2^16`.
    fn small_integer(&self) -> Option<i32> {
        let v = self.to_f64();
        if v.abs() < 65536.0 && v == v.trunc() && *self == Self::from_i64(v as i64, self.precision) {
            Some(v as i32)
        } else {
            None
        }
    }

    pub fn powi(&self, n: u32) -> Self {
        Self::wrap(self.value.powi(n as usize, self.precision, RM), self.precision)
    }

    pub fn recip(&self) -> Self {
        self.lift(1) / self
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    /// Binary exponent `e` with `|self| ∈ [2^(e-1), 2^e)`; `None` for zero and non-finite values.
    pub fn exponent(&self) -> Option<i64> {
        if self.is_zero() || !self.is_finite() {
            return None;
        }
        self.value.exponent().map(|e| e as i64)
    }

    /// `self · 2^k`, exact.
    pub fn mul_pow2(&self, k: i64) -> Self {
        let two = BigFloat::from_word(2, 64);
        let scale = two.powi(k.unsigned_abs() as usize, 64, RM);
        let v = if k >= 0 {
            self.value.mul(&scale, self.precision, RM)
        } else {
            self.value.div(&scale, self.precision, RM)
        };
        Self::wrap(v, self.precision)
    }

    /// `2^k` at the given precision.
    pub fn pow2(k: i64, precision: usize) -> Self {
        Self::one(precision).mul_pow2(k)
    }

    /// Nearest double; saturates to ±∞ or flushes to ±0 outside the `f64` range.
    pub fn to_f64(&self) -> f64 {
        if self.value.is_nan() {
            return f64::NAN;
        }
        if self.value.is_inf() {
            return if self.value.is_inf_pos() { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if self.is_zero() {
            return 0.0;
        }
        let Some((words, _, sign, exp, _)) = self.value.as_raw_parts() else {
            return f64::NAN;
        };
        let top = *words.last().unwrap_or(&0) as f64;
        let next = if words.len() >= 2 { words[words.len() - 2] as f64 } else { 0.0 };
        // value = 0.m × 2^exp, with the mantissa's top word holding the leading bits.
        let frac = (top + next / 18446744073709551616.0) / 18446744073709551616.0;
        let e = exp as i64;
        let half = (e / 2) as i32;
        let rest = (e - e / 2) as i32;
        let mag = frac * 2f64.powi(half) * 2f64.powi(rest);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// Decimal digits of `|self|` rounded to `sig` significant figures, with the decimal exponent
    /// `e` such that `|self| = 0.d₁d₂… × 10^e`.
    fn decimal_digits(&self, sig: usize) -> (bool, Vec<u8>, i64) {
        let (sign, mut digits, mut e) =
            with_consts(|cc| self.value.convert_to_radix(Radix::Dec, RM, cc)).unwrap_or((Sign::Pos, vec![0], 0));
        let negative = sign == Sign::Neg;
        let sig = sig.max(1);
        if digits.len() > sig {
            let round_up = digits[sig] >= 5;
            digits.truncate(sig);
            if round_up {
                let mut i = sig;
                loop {
                    if i == 0 {
                        digits.insert(0, 1);
                        digits.truncate(sig);
                        e += 1;
                        break;
                    }
                    i -= 1;
                    if digits[i] == 9 {
                        digits[i] = 0;
                    } else {
                        digits[i] += 1;
                        break;
                    }
                }
            }
        }
        while digits.len() > 1 && digits.last() == Some(&0) {
            digits.pop();
        }
        (negative, digits, e as i64)
    }

    /// Decimal rendering with `sig` significant digits: positional for moderate magnitudes,
    /// otherwise `d.ddd…e±N`.
    pub fn to_decimal_string(&self, sig: usize) -> String {
        if !self.is_finite() {
            return format!("{}", self.to_f64());
        }
        if self.is_zero() {
            return "0".to_string();
        }
        let (negative, digits, e) = self.decimal_digits(sig);
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        let ds: String = digits.iter().map(|d| (b'0' + d) as char).collect();
        if (-8..=24).contains(&e) {
            if e <= 0 {
                out.push_str("0.");
                out.extend(std::iter::repeat('0').take((-e) as usize));
                out.push_str(&ds);
            } else if (e as usize) >= ds.len() {
                out.push_str(&ds);
                out.extend(std::iter::repeat('0').take(e as usize - ds.len()));
            } else {
                out.push_str(&ds[..e as usize]);
                out.push('.');
                out.push_str(&ds[e as usize..]);
            }
        } else {
            out.push_str(&ds[..1]);
            if ds.len() > 1 {
                out.push('.');
                out.push_str(&ds[1..]);
            }
            out.push_str(&format!("e{}", e - 1));
        }
        out
    }

    /// Scientific rendering `d.ddd…e±N` with `sig` significant digits.
    pub fn to_scientific_string(&self, sig: usize) -> String {
        if !self.is_finite() {
            return format!("{}", self.to_f64());
        }
        if self.is_zero() {
            return "0e0".to_string();
        }
        let (negative, digits, e) = self.decimal_digits(sig);
        let ds: String = digits.iter().map(|d| (b'0' + d) as char).collect();
        let mut out = String::new();
        if negative {
            out.push('-');
        }
        out.push_str(&ds[..1]);
        if ds.len() > 1 {
            out.push('.');
            out.push_str(&ds[1..]);
        }
        out.push_str(&format!("e{}", e - 1));
        out
    }

    /// Number of significant decimal digits carried by `precision_bits`.
    pub fn decimal_digits_for(precision_bits: usize) -> usize {
        ((precision_bits as f64) * std::f64::consts::LOG10_2).floor() as usize
    }
}

impl fmt::Debug for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BigReal({}, {} bits)", self.to_decimal_string(40), self.precision)
    }
}

impl fmt::Display for BigReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = f.precision().unwrap_or_else(|| Self::decimal_digits_for(self.precision));
        f.write_str(&self.to_decimal_string(sig))
    }
}

impl PartialEq for BigReal {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for BigReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.cmp(&other.value).map(|c| c.cmp(&0))
    }
}

impl Neg for BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(BigFloat::neg(&self.value), self.precision)
    }
}

impl Neg for &BigReal {
    type Output = BigReal;
    fn neg(self) -> BigReal {
        BigReal::wrap(BigFloat::neg(&self.value), self.precision)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $assign_tr:ident, $assign_method:ident, $op:ident) => {
        impl $tr<&BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                let p = self.precision.max(rhs.precision);
                BigReal::wrap(self.value.$op(&rhs.value, p, RM), p)
            }
        }
        impl $tr<BigReal> for &BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                $tr::$method(self, &rhs)
            }
        }
        impl $tr<&BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: &BigReal) -> BigReal {
                $tr::$method(&self, rhs)
            }
        }
        impl $tr<BigReal> for BigReal {
            type Output = BigReal;
            fn $method(self, rhs: BigReal) -> BigReal {
                $tr::$method(&self, &rhs)
            }
        }
        impl $assign_tr<&BigReal> for BigReal {
            fn $assign_method(&mut self, rhs: &BigReal) {
                *self = $tr::$method(&*self, rhs);
            }
        }
        impl $assign_tr<BigReal> for BigReal {
            fn $assign_method(&mut self, rhs: BigReal) {
                *self = $tr::$method(&*self, &rhs);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, add);
binop!(Sub, sub, SubAssign, sub_assign, sub);
binop!(Mul, mul, MulAssign, mul_assign, mul);
binop!(Div, div, DivAssign, div_assign, div);

impl std::iter::Sum for BigReal {
    fn sum<I: Iterator<Item = BigReal>>(iter: I) -> BigReal {
        let mut acc: Option<BigReal> = None;
        for x in iter {
            acc = Some(match acc {
                None => x,
                Some(a) => a + x,
            });
        }
        acc.unwrap_or_else(|| BigReal::zero(MIN_PRECISION_BITS))
    }
}
