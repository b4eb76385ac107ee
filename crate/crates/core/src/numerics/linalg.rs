//! Dense symmetric linear algebra in extended precision: Cholesky factorisation, triangular
//! solves, cyclic Jacobi eigenvalues, and the Cholesky-whitened generalized pencil minimum.

use super::{BigReal, NumericsError};

/// Dense symmetric matrix; only the lower triangle is stored.
#[derive(Clone, Debug)]
pub struct SymMatrix {
    dim: usize,
    lower: Vec<BigReal>,
}

#[inline]
fn packed(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

impl SymMatrix {
    pub fn zeros(dim: usize, precision: usize) -> Self {
        Self { dim, lower: vec![BigReal::zero(precision); dim * (dim + 1) / 2] }
    }

    pub fn identity(dim: usize, precision: usize) -> Self {
        let mut m = Self::zeros(dim, precision);
        for i in 0..dim {
            m.set(i, i, BigReal::one(precision));
        }
        m
    }

    /// Builds a matrix from `entry(i, j)` evaluated on the lower triangle `j ≤ i`.
    pub fn from_fn(dim: usize, mut entry: impl FnMut(usize, usize) -> BigReal) -> Self {
        let mut lower = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in 0..=i {
                lower.push(entry(i, j));
            }
        }
        Self { dim, lower }
    }

    /// From a full row-major array; the lower triangle is authoritative.
    pub fn from_rows(rows: &[Vec<BigReal>]) -> Self {
        Self::from_fn(rows.len(), |i, j| rows[i][j].clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigReal {
        &self.lower[packed(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigReal) {
        self.lower[packed(i, j)] = v;
    }

    pub fn precision(&self) -> usize {
        self.lower.iter().map(BigReal::precision).max().unwrap_or(64)
    }

    /// Row-sum norm ‖M‖∞.
    pub fn norm_inf(&self) -> BigReal {
        let p = self.precision();
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).abs()).fold(BigReal::zero(p), |a, b| a + b))
            .fold(BigReal::zero(p), BigReal::max)
    }

    pub fn mul_vec(&self, v: &[BigReal]) -> Vec<BigReal> {
        let p = self.precision();
        (0..self.dim).map(|i| (0..self.dim).fold(BigReal::zero(p), |acc, j| acc + self.get(i, j) * &v[j])).collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[BigReal]) -> BigReal {
        let mv = self.mul_vec(v);
        v.iter().zip(&mv).fold(BigReal::zero(self.precision()), |a, (x, y)| a + x * y)
    }

    /// `|v|ᵀ |M| |v|` with entrywise absolute values; a scale for rounding-error estimates.
    pub fn abs_quad_form(&self, v: &[BigReal]) -> BigReal {
        let p = self.precision();
        let mut acc = BigReal::zero(p);
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.get(i, j).abs() * v[i].abs() * v[j].abs();
            }
        }
        acc
    }
}

/// Lower-triangular factor `L` with `L·Lᵀ = M`, stored packed by rows.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    dim: usize,
    lower: Vec<BigReal>,
    /// Smallest pivot `L_kk²` encountered.
    pub min_pivot: BigReal,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(i, j)`; zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> BigReal {
        if j > i {
            BigReal::zero(self.lower[0].precision())
        } else {
            self.lower[packed(i, j)].clone()
        }
    }

    fn at(&self, i: usize, j: usize) -> &BigReal {
        &self.lower[packed(i, j)]
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[BigReal]) -> Vec<BigReal> {
        let mut x: Vec<BigReal> = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut s = b[i].clone();
            for (j, xj) in x.iter().enumerate() {
                s -= self.at(i, j) * xj;
            }
            x.push(s / self.at(i, i));
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[BigReal]) -> Vec<BigReal> {
        let n = self.dim;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i].clone();
            for j in i + 1..n {
                s -= self.at(j, i) * &x[j];
            }
            x[i] = s / self.at(i, i);
        }
        x
    }

    /// Reconstructs `L·Lᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let p = self.lower[0].precision();
        SymMatrix::from_fn(self.dim, |i, j| {
            (0..=j).fold(BigReal::zero(p), |acc, k| acc + self.at(i, k) * self.at(j, k))
        })
    }
}

/// Cholesky factorisation `M = L·Lᵀ`.
///
/// A pivot that is non-positive, or that has lost more than half the working precision relative
/// to the corresponding diagonal entry (`d_k ≤ 2^(-P/2)·M_kk`), is reported as
/// `NotPositiveDefinite(k)`: the matrix is either degenerate or too ill-conditioned for `P` bits.
pub fn cholesky(m: &SymMatrix) -> Result<CholeskyFactor, NumericsError> {
    let n = m.dim();
    let p = m.precision();
    if n == 0 {
        return Err(NumericsError::Domain("cholesky of an empty matrix".into()));
    }
    let loss_floor = BigReal::pow2(-((p / 2) as i64), p);
    let mut lower: Vec<BigReal> = Vec::with_capacity(n * (n + 1) / 2);
    let mut min_pivot: Option<BigReal> = None;
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j).clone();
            for k in 0..j {
                s -= &lower[packed(i, k)] * &lower[packed(j, k)];
            }
            if i == j {
                let diag = m.get(i, i);
                if !s.is_positive() || !s.is_finite() || s <= diag * &loss_floor {
                    return Err(NumericsError::NotPositiveDefinite(i));
                }
                min_pivot = Some(match min_pivot {
                    None => s.clone(),
                    Some(mp) => mp.min(s.clone()),
                });
                lower.push(s.sqrt());
            } else {
                let d = &lower[packed(j, j)];
                lower.push(s / d);
            }
        }
    }
    Ok(CholeskyFactor { dim: n, lower, min_pivot: min_pivot.expect("n > 0") })
}

/// Full symmetric eigendecomposition by cyclic Jacobi rotations. Returns eigenvalues (in the
/// order of the diagonal after convergence) and eigenvectors as columns of a row-major matrix.
pub fn jacobi_eigen(m: &SymMatrix, max_sweeps: usize) -> Result<(Vec<BigReal>, Vec<Vec<BigReal>>), NumericsError> {
    let n = m.dim();
    let p = m.precision();
    let mut a: Vec<Vec<BigReal>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j).clone()).collect()).collect();
    let mut v: Vec<Vec<BigReal>> =
        (0..n).map(|i| (0..n).map(|j| BigReal::from_i64((i == j) as i64, p)).collect()).collect();
    let scale = m.norm_inf();
    if scale.is_zero() {
        return Ok(((0..n).map(|_| BigReal::zero(p)).collect(), v));
    }
    // Off-diagonal entries below 2^-(P+8)·‖M‖ are numerically zero.
    let eps = BigReal::pow2(-(p as i64) - 8, p) * &scale;
    let one = BigReal::one(p);
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut off = BigReal::zero(p);
        for i in 0..n {
            for j in 0..i {
                off = off.max(a[i][j].abs());
            }
        }
        if off <= eps {
            converged = true;
            break;
        }
        for q in 1..n {
            for pp in 0..q {
                let apq = a[pp][q].clone();
                if apq.abs() <= eps {
                    continue;
                }
                let theta = (&a[q][q] - &a[pp][pp]) / apq.mul_pow2(1);
                let t = {
                    let denom = theta.abs() + (&theta * &theta + &one).sqrt();
                    let t = one.clone() / denom;
                    if theta.is_negative() {
                        -t
                    } else {
                        t
                    }
                };
                let c = (&t * &t + &one).sqrt().recip();
                let s = &t * &c;
                let tau = &s / (&one + &c);
                // Diagonal updates.
                let tapq = &t * &apq;
                a[pp][pp] = &a[pp][pp] - &tapq;
                a[q][q] = &a[q][q] + &tapq;
                a[pp][q] = BigReal::zero(p);
                a[q][pp] = BigReal::zero(p);
                for r in 0..n {
                    if r == pp || r == q {
                        continue;
                    }
                    let arp = a[r][pp].clone();
                    let arq = a[r][q].clone();
                    let new_rp = &arp - &s * (&arq + &tau * &arp);
                    let new_rq = &arq + &s * (&arp - &tau * &arq);
                    a[r][pp] = new_rp.clone();
                    a[pp][r] = new_rp;
                    a[r][q] = new_rq.clone();
                    a[q][r] = new_rq;
                }
                for row in v.iter_mut() {
                    let vrp = row[pp].clone();
                    let vrq = row[q].clone();
                    row[pp] = &vrp - &s * (&vrq + &tau * &vrp);
                    row[q] = &vrq + &s * (&vrp - &tau * &vrq);
                }
            }
        }
    }
    if !converged {
        let mut off = BigReal::zero(p);
        for i in 0..n {
            for j in 0..i {
                off = off.max(a[i][j].abs());
            }
        }
        if off > eps {
            return Err(NumericsError::NoConvergence { sweeps: max_sweeps });
        }
    }
    let values = (0..n).map(|i| a[i][i].clone()).collect();
    Ok((values, v))
}

/// Default sweep limit for the Jacobi solver.
pub const DEFAULT_MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue and a unit eigenvector. Among tied minima the first diagonal position wins.
pub fn sym_eig_min(m: &SymMatrix) -> Result<(BigReal, Vec<BigReal>), NumericsError> {
    let (values, vectors) = jacobi_eigen(m, DEFAULT_MAX_SWEEPS)?;
    let mut best = 0;
    for (i, val) in values.iter().enumerate().skip(1) {
        if *val < values[best] {
            best = i;
        }
    }
    let v: Vec<BigReal> = vectors.iter().map(|row| row[best].clone()).collect();
    Ok((values[best].clone(), v))
}

/// Solution of the symmetric-definite pencil `A v = λ M v` at its smallest `λ`.
#[derive(Clone, Debug)]
pub struct PencilMin {
    pub value: BigReal,
    /// Generalized eigenvector, normalised to `vᵀ M v = 1`.
    pub vector: Vec<BigReal>,
    pub min_pivot: BigReal,
    /// `‖v‖₁·‖A v − λ M v‖∞` plus a rounding allowance `dim·2^-(P-8)·(|v|ᵀ|A||v| + |λ|·|v|ᵀ|M||v|)`.
    /// Bounds the gap between `λ` and `vᵀ A v` recomputed from the same moments.
    pub residual: BigReal,
}

/// Smallest generalized eigenvalue of `(A, M)` with `M` positive definite, via whitening
/// `C = L⁻¹ A L⁻ᵀ` where `M = L·Lᵀ`.
pub fn pencil_min(a: &SymMatrix, m: &SymMatrix) -> Result<PencilMin, NumericsError> {
    let n = m.dim();
    if a.dim() != n {
        return Err(NumericsError::Domain(format!("pencil dimension mismatch: {} vs {}", a.dim(), n)));
    }
    let p = m.precision().max(a.precision());
    let l = cholesky(m)?;
    // X = L⁻¹ A, column by column; then C = L⁻¹ Xᵀ (= L⁻¹ A L⁻ᵀ, symmetric).
    let a_cols: Vec<Vec<BigReal>> = (0..n).map(|j| (0..n).map(|i| a.get(i, j).clone()).collect()).collect();
    let x_cols: Vec<Vec<BigReal>> = a_cols.iter().map(|c| l.solve_lower(c)).collect();
    // Row i of X is (x_cols[j][i])_j, which is column i of Xᵀ.
    let c_cols: Vec<Vec<BigReal>> = (0..n)
        .map(|i| {
            let xt_col: Vec<BigReal> = (0..n).map(|j| x_cols[j][i].clone()).collect();
            l.solve_lower(&xt_col)
        })
        .collect();
    let c = SymMatrix::from_fn(n, |i, j| (&c_cols[j][i] + &c_cols[i][j]).mul_pow2(-1));
    let (value, y) = sym_eig_min(&c)?;
    let mut v = l.solve_upper(&y);
    let norm2 = m.quad_form(&v);
    let scale = norm2.sqrt().recip();
    for x in v.iter_mut() {
        *x *= &scale;
    }
    let av = a.mul_vec(&v);
    let mv = m.mul_vec(&v);
    let mut r_inf = BigReal::zero(p);
    for (x, y) in av.iter().zip(&mv) {
        r_inf = r_inf.max((x - &value * y).abs());
    }
    let v_l1 = v.iter().fold(BigReal::zero(p), |acc, x| acc + x.abs());
    let rounding = BigReal::pow2(-(p as i64) + 8, p)
        * BigReal::from_u64(n as u64, p)
        * (a.abs_quad_form(&v) + value.abs() * m.abs_quad_form(&v));
    let residual = v_l1 * r_inf + rounding;
    Ok(PencilMin { value, vector: v, min_pivot: l.min_pivot.clone(), residual })
}
