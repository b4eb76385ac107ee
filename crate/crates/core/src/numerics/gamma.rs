//! Euler gamma function via Spouge's approximation.
//!
//! For working precision `P` the term count `a` is chosen so that the truncation error
//! `a^(-1/2) (2π)^(-(a+1/2))` sits below `2^-(P+10)`. The coefficients alternate in sign and reach
//! magnitude roughly `e^a`, so they are computed and summed at an internal precision of `2P + 64`
//! bits and the result is rounded back to `P`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{BigReal, NumericsError};

struct SpougeTable {
    a: u32,
    /// `c_0 = √(2π)` followed by `c_1 … c_{a-1}`, all at the internal precision.
    coeffs: Vec<BigReal>,
}

fn internal_precision(precision: usize) -> usize {
    2 * precision + 64
}

fn term_count(precision: usize) -> u32 {
    let bits = (precision + 10) as f64;
    (bits * std::f64::consts::LN_2 / (2.0 * std::f64::consts::PI).ln()).ceil() as u32 + 1
}

fn table(precision: usize) -> Arc<SpougeTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<SpougeTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("spouge cache poisoned").get(&precision) {
        return Arc::clone(t);
    }
    let t = Arc::new(build_table(precision));
    cache.lock().expect("spouge cache poisoned").entry(precision).or_insert(t).clone()
}

fn build_table(precision: usize) -> SpougeTable {
    let w = internal_precision(precision);
    let a = term_count(precision);
    let two_pi = BigReal::pi(w).mul_pow2(1);
    let mut coeffs = Vec::with_capacity(a as usize);
    coeffs.push(two_pi.sqrt());
    let half = BigReal::from_ratio(1, 2, w);
    // (k-1)! maintained incrementally.
    let mut factorial = BigReal::one(w);
    for k in 1..a {
        if k > 1 {
            factorial *= BigReal::from_u64((k - 1) as u64, w);
        }
        let base = BigReal::from_i64((a - k) as i64, w);
        let power = base.powf(&(BigReal::from_i64(k as i64, w) - &half));
        let e = BigReal::from_i64((a - k) as i64, w).exp();
        let mut c = power * e / &factorial;
        if k % 2 == 0 {
            c = -c;
        }
        coeffs.push(c);
    }
    SpougeTable { a, coeffs }
}

/// Γ(z+1) for z ≥ 0 at the internal precision of `t`.
fn spouge_shifted(z: &BigReal, t: &SpougeTable) -> BigReal {
    let w = z.precision();
    let mut sum = t.coeffs[0].clone();
    for k in 1..t.a {
        let denom = z + BigReal::from_u64(k as u64, w);
        sum += &t.coeffs[k as usize] / denom;
    }
    let za = z + BigReal::from_u64(t.a as u64, w);
    let half = BigReal::from_ratio(1, 2, w);
    let log_factor = (z + &half) * za.ln() - &za;
    log_factor.exp() * sum
}

/// Euler's Γ(x) for `x > 0`, with relative error below `2^-(P-8)` at the precision `P` of `x`.
pub fn gamma_fn(x: &BigReal) -> Result<BigReal, NumericsError> {
    if !x.is_positive() || !x.is_finite() {
        return Err(NumericsError::Domain(format!("gamma requires a positive argument, got {}", x.to_f64())));
    }
    let p = x.precision();
    let t = table(p);
    let w = internal_precision(p);
    let mut z = x.with_precision(w);
    // Shift the argument to z ≥ 1 and divide out the shift: Γ(x) = Γ(x+m) / (x(x+1)…(x+m-1)).
    let one = BigReal::one(w);
    let mut divisor = BigReal::one(w);
    while z < one {
        divisor *= &z;
        z += &one;
    }
    // Γ(z) = Γ((z-1)+1)
    let g = spouge_shifted(&(z - &one), &t) / divisor;
    Ok(g.with_precision(p))
}
