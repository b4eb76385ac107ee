//! Tanh-sinh (double exponential) quadrature in extended precision.
//!
//! On `[a, b]` the substitution `x = c + h·tanh(π/2·sinh t)` clusters nodes at both endpoints, which
//! tolerates integrable endpoint singularities and converges double-exponentially for integrands
//! analytic in the interior. Nodes are evaluated through their distance to the nearest endpoint,
//! `h·2/(e^{2u}+1)`, so no precision is lost next to `a` or `b`.

use std::collections::HashMap;

use super::BigReal;

#[derive(Clone, Debug)]
pub struct TanhSinhOptions {
    /// Relative tolerance on successive level estimates.
    pub rel_tol: f64,
    /// Absolute tolerance floor.
    pub abs_tol: f64,
    pub max_level: u32,
    pub min_level: u32,
}

impl Default for TanhSinhOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-30, abs_tol: 0.0, max_level: 12, min_level: 3 }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: BigReal,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Abscissa offsets and weights on the unit interval, keyed by `t = k·2^-FINEST` and shared
/// between panels.
struct NodeTable {
    precision: usize,
    pi_half: BigReal,
    weight_floor: BigReal,
    /// `None` once the weight has dropped below `weight_floor`.
    nodes: HashMap<u64, Option<(BigReal, BigReal)>>,
}

const FINEST: u32 = 24;

impl NodeTable {
    fn new(precision: usize) -> Self {
        Self {
            precision,
            pi_half: BigReal::pi(precision).mul_pow2(-1),
            // Stop adding nodes once weights drop below this (relative to the half-width).
            weight_floor: BigReal::pow2(-(precision as i64) - 16, precision),
            nodes: HashMap::new(),
        }
    }

    /// `(1 − tanh(π/2·sinh t), w(t))` at `t = j·2^-level`.
    fn node(&mut self, j: u64, level: u32) -> Option<(BigReal, BigReal)> {
        let key = j << (FINEST - level);
        if let Some(v) = self.nodes.get(&key) {
            return v.clone();
        }
        let p = self.precision;
        let one = BigReal::one(p);
        let t = BigReal::from_u64(j, p).mul_pow2(-(level as i64));
        let et = t.exp();
        let et_inv = et.recip();
        let sinh = (&et - &et_inv).mul_pow2(-1);
        let cosh = (&et + &et_inv).mul_pow2(-1);
        let u = &self.pi_half * &sinh;
        let e2u = u.mul_pow2(1).exp();
        // 1 - tanh(u) = 2/(e^{2u}+1); cosh²(u) = (e^{2u}+2+e^{-2u})/4
        let delta = BigReal::from_i64(2, p) / (&e2u + &one);
        let cosh2 = (&e2u + BigReal::from_i64(2, p) + e2u.recip()).mul_pow2(-2);
        let w = &self.pi_half * &cosh / cosh2;
        let v = if w < self.weight_floor || delta.is_zero() { None } else { Some((delta, w)) };
        self.nodes.insert(key, v.clone());
        v
    }
}

/// Integrates `f` over `[a, b]` (finite, `a < b`).
pub fn tanh_sinh(f: impl FnMut(&BigReal) -> BigReal, a: &BigReal, b: &BigReal, opts: &TanhSinhOptions) -> QuadResult {
    let p = a.precision().max(b.precision());
    integrate(f, a, b, opts, &mut NodeTable::new(p))
}

fn integrate(
    mut f: impl FnMut(&BigReal) -> BigReal,
    a: &BigReal,
    b: &BigReal,
    opts: &TanhSinhOptions,
    table: &mut NodeTable,
) -> QuadResult {
    let p = table.precision;
    let half_width = (b - a).mul_pow2(-1);
    let max_level = opts.max_level.min(FINEST);
    let mut evaluations = 0usize;

    // Σ w(t)·(f(x₋) + f(x₊)) over t = j·2^-level for j = start, start+step, …
    let mut node_sum = |level: u32, start: u64, step: u64, evals: &mut usize| -> BigReal {
        let mut acc = BigReal::zero(p);
        let mut j = start;
        while let Some((delta, w)) = table.node(j, level) {
            let offset = &half_width * &delta;
            let x_lo = a + &offset;
            let x_hi = b - &offset;
            let term = if j == 0 {
                // t = 0 is the midpoint, counted once.
                f(&x_lo)
            } else {
                f(&x_lo) + f(&x_hi)
            };
            *evals += if j == 0 { 1 } else { 2 };
            acc += w * term;
            j += step;
        }
        acc
    };

    let mut h = BigReal::one(p);
    // Level 0: all integer nodes.
    let mut sum = node_sum(0, 0, 1, &mut evaluations);
    let mut estimate = &half_width * &h * &sum;
    let mut error_estimate = f64::INFINITY;
    let mut converged = false;
    for level in 1..=max_level {
        h = h.mul_pow2(-1);
        // New nodes are the odd multiples of the halved step.
        let odd = node_sum(level, 1, 2, &mut evaluations);
        sum = sum + odd;
        let next = &half_width * &h * &sum;
        let diff = (&next - &estimate).abs().to_f64();
        let scale = next.abs().to_f64();
        error_estimate = diff;
        estimate = next;
        if level >= opts.min_level && diff <= (opts.rel_tol * scale).max(opts.abs_tol) {
            converged = true;
            break;
        }
    }
    QuadResult { value: estimate, error_estimate, evaluations, converged }
}

/// Integrates over consecutive panels `[breaks[i], breaks[i+1]]` and sums.
pub fn tanh_sinh_panels(
    mut f: impl FnMut(&BigReal) -> BigReal,
    breaks: &[BigReal],
    opts: &TanhSinhOptions,
) -> QuadResult {
    let p = breaks.iter().map(BigReal::precision).max().unwrap_or(64);
    let mut table = NodeTable::new(p);
    let mut total = BigReal::zero(p);
    let mut err = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    for w in breaks.windows(2) {
        if w[0] >= w[1] {
            continue;
        }
        let r = integrate(&mut f, &w[0], &w[1], opts, &mut table);
        total += r.value;
        err += r.error_estimate;
        evaluations += r.evaluations;
        converged &= r.converged;
    }
    QuadResult { value: total, error_estimate: err, evaluations, converged }
}

/// Panel breakpoints `0, 2^k0, 2^(k0+1), …` up to and including the first power of two ≥ `upper`.
pub fn geometric_breaks(first: i64, upper: f64, precision: usize) -> Vec<BigReal> {
    let mut out = vec![BigReal::zero(precision)];
    let mut k = first;
    loop {
        out.push(BigReal::pow2(k, precision));
        if 2f64.powi(k as i32) >= upper {
            break;
        }
        k += 1;
    }
    out
}
