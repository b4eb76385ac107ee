use super::{BigReal, NumericsError};

const MAX_BISECTIONS: usize = 100_000;

/// Root of a continuous, strictly monotone `h` on `[lo, hi]` by bisection.
///
/// Stops once the bracket is no wider than `tol` (returning its midpoint) or `h` vanishes exactly
/// at a probe point.
pub fn bisect_root(
    h: impl Fn(&BigReal) -> BigReal,
    lo: &BigReal,
    hi: &BigReal,
    tol: &BigReal,
) -> Result<BigReal, NumericsError> {
    let mut lo = lo.clone();
    let mut hi = hi.clone();
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let h_lo = h(&lo);
    if h_lo.is_zero() {
        return Ok(lo);
    }
    let h_hi = h(&hi);
    if h_hi.is_zero() {
        return Ok(hi);
    }
    if h_lo.is_negative() == h_hi.is_negative() {
        return Err(NumericsError::BracketInvalid { lo: lo.to_f64(), hi: hi.to_f64() });
    }
    let lo_negative = h_lo.is_negative();
    for _ in 0..MAX_BISECTIONS {
        let mid = (&lo + &hi).mul_pow2(-1);
        if (&hi - &lo) <= *tol {
            return Ok(mid);
        }
        let hm = h(&mid);
        if hm.is_zero() {
            return Ok(mid);
        }
        if hm.is_negative() == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((&lo + &hi).mul_pow2(-1))
}
