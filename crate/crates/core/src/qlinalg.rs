//! Dense complex linear algebra for small matrices.
//!
//! Everything here works on [`CMatrix`], a row-major buffer of `Complex64`.
//! Matrix functions (square root, logarithm, PSD projection) go through a
//! cyclic Jacobi eigensolver for Hermitian matrices; inputs are symmetrized
//! as `(m + m^dagger) / 2` first and rejected only when the asymmetry is
//! larger than [`HERMITIAN_TOL`].

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest entrywise `|m - m^dagger|` accepted by the matrix functions.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Default eigenvalue floor for [`mat_log_psd`].
pub const LOG_FLOOR: f64 = 1e-12;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    /// Builds a matrix from row-major entries, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows * cols != data.len() {
            return Err(Error::BadDims(format!("{} entries for a {}x{} matrix", data.len(), rows, cols)));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadDims("non-finite entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor for literals; panics on ragged input.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        let m = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(n * m);
        for row in rows {
            assert_eq!(row.as_ref().len(), m, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Self { rows: n, cols: m, data }
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let rows: Vec<Vec<C64>> = rows.iter().map(|row| row.as_ref().iter().map(|&x| r(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn diag(values: &[C64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn real_diag(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| r(x)).collect();
        Self::diag(&v)
    }

    /// `|v><v|` for a ket given by its amplitudes.
    pub fn outer(ket: &[C64]) -> Self {
        Self::outer2(ket, ket)
    }

    /// `|a><b|`.
    pub fn outer2(a: &[C64], b: &[C64]) -> Self {
        let mut m = Self::zeros(a.len(), b.len());
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                m[(i, j)] = x * y.conj();
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, k: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * k).collect() }
    }

    pub fn scale_re(&self, k: f64) -> Self {
        self.scale(r(k))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert-Schmidt inner product `Tr(self^dagger other)`.
    pub fn hs_inner(&self, other: &CMatrix) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest entrywise absolute difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise `|m - m^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = (self[(i, j)] + self[(j, i)].conj()) * 0.5;
            }
        }
        m
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::BadDims(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::BadDims(format!(
                "vector of length {} for a {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `self * m * self^dagger`.
    pub fn sandwich(&self, m: &CMatrix) -> Result<CMatrix> {
        self.matmul(m)?.matmul(&self.adjoint())
    }

    fn zip_with(&self, other: &CMatrix, f: impl Fn(C64, C64) -> C64) -> Self {
        assert!(
            self.rows == other.rows && self.cols == other.cols,
            "shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

/// Panics on inner-dimension mismatch; use [`CMatrix::matmul`] for a checked product.
impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let x = a[(i, j)];
            if x == ZERO {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out[(i * b.rows + k, j * b.cols + l)] = x * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// Which factor of a bipartite `A ⊗ B` space to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of an operator on `A ⊗ B` (A is the leading factor).
pub fn partial_trace(m: &CMatrix, dim_a: usize, dim_b: usize, keep: Subsystem) -> Result<CMatrix> {
    let n = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || m.rows != n || m.cols != n {
        return Err(Error::BadDims(format!("partial trace of {}x{} over {}x{}", m.rows, m.cols, dim_a, dim_b)));
    }
    let out = match keep {
        Subsystem::A => {
            let mut out = CMatrix::zeros(dim_a, dim_a);
            for i in 0..dim_a {
                for j in 0..dim_a {
                    out[(i, j)] = (0..dim_b).map(|k| m[(i * dim_b + k, j * dim_b + k)]).sum();
                }
            }
            out
        }
        Subsystem::B => {
            let mut out = CMatrix::zeros(dim_b, dim_b);
            for i in 0..dim_b {
                for j in 0..dim_b {
                    out[(i, j)] = (0..dim_a).map(|k| m[(k * dim_b + i, k * dim_b + j)]).sum();
                }
            }
            out
        }
    };
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Unitary; column `k` pairs with `values[k]`.
    pub vectors: CMatrix,
}

impl HermEigen {
    /// `V diag(f(λ)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = ZERO;
                for (k, &w) in fv.iter().enumerate() {
                    if w != 0.0 {
                        acc += v[(i, k)] * v[(j, k)].conj() * w;
                    }
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc.conj();
            }
            out[(i, i)] = r(out[(i, i)].re);
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map_spectrum(|x| x)
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.rows).map(|i| self.vectors[(i, k)]).collect()
    }
}

fn checked_hermitian(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::BadDims(format!("{}x{} is not square", m.rows, m.cols)));
    }
    let err = m.hermiticity_error();
    if err > HERMITIAN_TOL {
        return Err(Error::NotHermitian(err));
    }
    Ok(m.hermitian_part())
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn herm_eig(m: &CMatrix) -> Result<HermEigen> {
    let a = checked_hermitian(m)?;
    let n = a.rows;
    Ok(jacobi(a, CMatrix::identity(n)))
}

/// As [`herm_eig`], starting from an approximate eigenbasis `guess`
/// (unitary, e.g. the eigenvectors of a nearby matrix). Converges in fewer
/// sweeps when `guess^dagger m guess` is close to diagonal.
pub fn herm_eig_from(m: &CMatrix, guess: &CMatrix) -> Result<HermEigen> {
    let a = checked_hermitian(m)?;
    if guess.rows != a.rows || guess.cols != a.rows {
        return Err(Error::BadDims(format!(
            "{}x{} eigenbasis guess for a {}x{} matrix",
            guess.rows, guess.cols, a.rows, a.rows
        )));
    }
    let rotated = guess.adjoint().matmul(&a)?.matmul(guess)?.hermitian_part();
    Ok(jacobi(rotated, guess.clone()))
}

fn jacobi(mut a: CMatrix, mut v: CMatrix) -> HermEigen {
    let n = a.rows;
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= 1e-300 || g <= 1e-18 * scale {
                    continue;
                }
                let phase = apq / g;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                // Unitary acting on columns (p, q):
                // [[c, s], [-s e^{-iφ}, c e^{-iφ}]] with e^{iφ} = a_pq / |a_pq|.
                let ph = phase.conj();
                let u_pp = r(cs);
                let u_pq = r(sn);
                let u_qp = ph * (-sn);
                let u_qq = ph * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = r(a[(p, p)].re);
                a[(q, q)] = r(a[(q, q)].re);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, dst)] = v[(i, src)];
        }
    }
    HermEigen { values, vectors }
}

/// Hermitian PSD square root; eigenvalues below zero are clipped.
pub fn mat_sqrt_psd(m: &CMatrix) -> Result<CMatrix> {
    Ok(herm_eig(m)?.map_spectrum(|x| x.max(0.0).sqrt()))
}

/// `V diag(ln max(λ, floor)) V^dagger`.
pub fn mat_log_psd(m: &CMatrix, floor: f64) -> Result<CMatrix> {
    if floor <= 0.0 || !floor.is_finite() {
        return Err(Error::BadDims(format!("log floor must be positive, got {floor}")));
    }
    Ok(herm_eig(m)?.map_spectrum(|x| x.max(floor).ln()))
}

/// Exponential of a Hermitian matrix.
pub fn mat_exp_herm(m: &CMatrix) -> Result<CMatrix> {
    Ok(herm_eig(m)?.map_spectrum(f64::exp))
}

/// Nearest PSD matrix in Frobenius norm.
pub fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    Ok(herm_eig(m)?.map_spectrum(|x| x.max(0.0)))
}

/// Column-stacking vectorization.
pub fn vec(m: &CMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn unvec(v: &[C64], rows: usize, cols: usize) -> Result<CMatrix> {
    if rows * cols != v.len() || rows == 0 {
        return Err(Error::BadDims(format!("cannot reshape {} entries to {}x{}", v.len(), rows, cols)));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = v[j * rows + i];
        }
    }
    Ok(m)
}

/// Solves `a x = b` (b may hold several right-hand sides as columns) by LU
/// with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.rows;
    if !a.is_square() || b.rows != n {
        return Err(Error::BadDims(format!("solve with {}x{} system and {}x{} rhs", a.rows, a.cols, b.rows, b.cols)));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = b.cols;
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (piv, best) =
            (k..n).map(|i| (i, lu[(i, k)].norm())).fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best <= 1e-14 * scale {
            return Err(Error::Singular(format!("pivot {best:e} at column {k}")));
        }
        if piv != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = t;
            }
            for j in 0..m {
                let t = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = t;
            }
        }
        let d = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / d;
            if f == ZERO {
                continue;
            }
            for j in k..n {
                let t = lu[(k, j)];
                lu[(i, j)] -= f * t;
            }
            for j in 0..m {
                let t = x[(k, j)];
                x[(i, j)] -= f * t;
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..m {
            let mut acc = x[(k, j)];
            for l in (k + 1)..n {
                acc -= lu[(k, l)] * x[(l, j)];
            }
            x[(k, j)] = acc / lu[(k, k)];
        }
    }
    Ok(x)
}

/// Real dense solve `a x = b` with `a` given row-major (n x n).
pub fn solve_real(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::BadDims(format!("{} entries for a {n}x{n} system", a.len())));
    }
    let am = CMatrix::new(n, n, a.iter().map(|&x| r(x)).collect())?;
    let bm = CMatrix::new(n, 1, b.iter().map(|&x| r(x)).collect())?;
    let x = solve(&am, &bm)?;
    Ok(x.data.iter().map(|z| z.re).collect())
}

/// Orthonormal basis of the span of `vectors` together with an orthonormal
/// basis of its complement in `C^dim`, both by modified Gram-Schmidt with one
/// re-orthogonalization pass.
pub fn span_and_complement(vectors: &[Vec<C64>], dim: usize, tol: f64) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
    fn absorb(basis: &mut Vec<Vec<C64>>, v: &[C64], tol: f64) -> bool {
        let mut w = v.to_vec();
        let norm0 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let proj: C64 = b.iter().zip(&w).map(|(x, y)| x.conj() * y).sum();
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= proj * bi;
                }
            }
        }
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= tol * norm0.max(1.0) {
            return false;
        }
        for wi in &mut w {
            *wi /= norm;
        }
        basis.push(w);
        true
    }

    let mut span = Vec::new();
    for v in vectors {
        absorb(&mut span, v, tol);
    }
    let mut all = span.clone();
    let mut complement = Vec::new();
    for k in 0..dim {
        if all.len() == dim {
            break;
        }
        let mut e = vec![ZERO; dim];
        e[k] = ONE;
        if absorb(&mut all, &e, tol) {
            complement.push(all.last().cloned().unwrap());
        }
    }
    (span, complement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sx() -> CMatrix {
        CMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
    }
    fn sz() -> CMatrix {
        CMatrix::real_diag(&[1.0, -1.0])
    }

    fn arb_c() -> impl Strategy<Value = C64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b))
    }

    fn arb_mat(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec(arb_c(), n * n).prop_map(move |d| CMatrix::new(n, n, d).unwrap())
    }

    fn arb_herm(n: usize) -> impl Strategy<Value = CMatrix> {
        arb_mat(n).prop_map(|m| m.hermitian_part())
    }

    #[test]
    fn kron_examples() {
        let i2 = CMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4));
        assert_eq!(kron(&sz(), &sz()), CMatrix::real_diag(&[1.0, -1.0, -1.0, 1.0]));
        let p0 = CMatrix::real_diag(&[1.0, 0.0]);
        let k = kron(&p0, &sx());
        let expected = CMatrix::from_real_rows(&[
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]);
        assert_eq!(k, expected);
    }

    #[test]
    fn partial_trace_examples() {
        let ket00 = [ONE, ZERO, ZERO, ZERO];
        let rho = CMatrix::outer(&ket00);
        let a = partial_trace(&rho, 2, 2, Subsystem::A).unwrap();
        assert!(a.max_abs_diff(&CMatrix::real_diag(&[1.0, 0.0])) < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [r(s), ZERO, ZERO, c(0.0, -s)];
        let a = partial_trace(&CMatrix::outer(&phi), 2, 2, Subsystem::A).unwrap();
        assert!(a.max_abs_diff(&CMatrix::identity(2).scale_re(0.5)) < 1e-15);

        let ra = CMatrix::from_rows(&[[r(0.7), c(0.1, 0.2)], [c(0.1, -0.2), r(0.3)]]);
        let rb = CMatrix::from_rows(&[[r(0.4), c(0.0, 0.3)], [c(0.0, -0.3), r(0.6)]]);
        let b = partial_trace(&kron(&ra, &rb), 2, 2, Subsystem::B).unwrap();
        assert!(b.max_abs_diff(&rb) < 1e-15);

        assert!(matches!(partial_trace(&CMatrix::identity(3), 2, 2, Subsystem::A), Err(Error::BadDims(_))));
    }

    #[test]
    fn herm_eig_examples() {
        let e = herm_eig(&CMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);

        let e = herm_eig(&sx()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] + 1.0).abs() < 1e-14);
        let plus = e.column(0);
        // |+> up to phase
        let overlap = (plus[0] + plus[1]).norm() / 2f64.sqrt();
        assert!((overlap - 1.0).abs() < 1e-12);

        let e = herm_eig(&CMatrix::real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn herm_eig_errors() {
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(herm_eig(&rect), Err(Error::BadDims(_))));
        let m = CMatrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(herm_eig(&m), Err(Error::NotHermitian(_))));
        // tiny asymmetry is tolerated
        let m = CMatrix::from_real_rows(&[[1.0, 1e-10], [0.0, 1.0]]);
        assert!(herm_eig(&m).is_ok());
    }

    #[test]
    fn matrix_function_examples() {
        let i3 = CMatrix::identity(3);
        assert!(mat_sqrt_psd(&i3).unwrap().max_abs_diff(&i3) < 1e-14);
        let s = mat_sqrt_psd(&CMatrix::real_diag(&[4.0, 9.0])).unwrap();
        assert!(s.max_abs_diff(&CMatrix::real_diag(&[2.0, 3.0])) < 1e-14);
        let plus = CMatrix::from_real_rows(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!(mat_sqrt_psd(&plus).unwrap().max_abs_diff(&plus) < 1e-12);

        assert!(mat_log_psd(&i3, LOG_FLOOR).unwrap().max_abs() < 1e-14);
        let e = std::f64::consts::E;
        let l = mat_log_psd(&CMatrix::real_diag(&[e, e * e]), LOG_FLOOR).unwrap();
        assert!(l.max_abs_diff(&CMatrix::real_diag(&[1.0, 2.0])) < 1e-14);
        let l = mat_log_psd(&CMatrix::real_diag(&[1.0, 0.0]), LOG_FLOOR).unwrap();
        assert!(l.max_abs_diff(&CMatrix::real_diag(&[0.0, LOG_FLOOR.ln()])) < 1e-12);
        assert!(mat_log_psd(&i3, 0.0).is_err());

        assert!(project_psd(&i3).unwrap().max_abs_diff(&i3) < 1e-14);
        let p = project_psd(&CMatrix::real_diag(&[1.0, -0.5])).unwrap();
        assert!(p.max_abs_diff(&CMatrix::real_diag(&[1.0, 0.0])) < 1e-14);
        let p = project_psd(&sz()).unwrap();
        assert!(p.max_abs_diff(&CMatrix::real_diag(&[1.0, 0.0])) < 1e-14);
    }

    #[test]
    fn vec_examples() {
        assert_eq!(vec(&CMatrix::identity(2)), vec![ONE, ZERO, ZERO, ONE]);
        assert_eq!(unvec(&vec(&sx()), 2, 2).unwrap(), sx());
        let d = CMatrix::diag(&[c(1.5, 0.5), c(-2.0, 0.0)]);
        assert_eq!(vec(&d), vec![c(1.5, 0.5), ZERO, ZERO, c(-2.0, 0.0)]);
        assert!(matches!(unvec(&[ONE; 3], 2, 2), Err(Error::BadDims(_))));
        let m = CMatrix::from_rows(&[[r(1.0), r(2.0)], [r(3.0), r(4.0)]]);
        assert_eq!(vec(&m), vec![r(1.0), r(3.0), r(2.0), r(4.0)]);
    }

    #[test]
    fn solve_recovers_known_solution() {
        let a = CMatrix::from_rows(&[[c(2.0, 1.0), r(1.0)], [r(0.5), c(0.0, -3.0)]]);
        let x = CMatrix::from_rows(&[[c(1.0, -1.0)], [c(0.25, 2.0)]]);
        let b = &a * &x;
        assert!(solve(&a, &b).unwrap().max_abs_diff(&x) < 1e-14);
        let sing = CMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(solve(&sing, &x), Err(Error::Singular(_))));
    }

    #[test]
    fn complement_has_full_dimension() {
        let v = vec![vec![ONE, ONE, ZERO], vec![r(2.0), r(2.0), ZERO]];
        let (span, comp) = span_and_complement(&v, 3, 1e-10);
        assert_eq!(span.len(), 1);
        assert_eq!(comp.len(), 2);
        for w in &comp {
            let ip: C64 = span[0].iter().zip(w).map(|(a, b)| a.conj() * b).sum();
            assert!(ip.norm() < 1e-14);
        }
    }

    #[test]
    fn eig_reconstructs_larger_matrix() {
        let n = 40;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = c(((i * 7 + j * 3) % 11) as f64 / 11.0, ((i + 2 * j) % 5) as f64 / 7.0);
            }
        }
        let h = m.hermitian_part();
        let e = herm_eig(&h).unwrap();
        assert!(e.reconstruct().max_abs_diff(&h) < 1e-10);
    }

    #[test]
    fn warm_start_matches_cold_start() {
        let n = 12;
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = c(((i * 5 + j) % 7) as f64 / 7.0, ((3 * i + j) % 4) as f64 / 9.0);
            }
        }
        let h = m.hermitian_part();
        let cold = herm_eig(&h).unwrap();
        // guess: eigenbasis of a nearby matrix
        let nearby = &h + &CMatrix::identity(n).scale_re(1e-3);
        let guess = herm_eig(&(&nearby + &kron(&CMatrix::real_diag(&[1e-3, 0.0]), &CMatrix::identity(n / 2)))).unwrap();
        let warm = herm_eig_from(&h, &guess.vectors).unwrap();
        assert!(warm.reconstruct().max_abs_diff(&h) < 1e-10);
        for (a, b) in warm.values.iter().zip(&cold.values) {
            assert!((a - b).abs() < 1e-10);
        }
        let vv = &warm.vectors.adjoint() * &warm.vectors;
        assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-10);
    }

    proptest! {
        #[test]
        fn kron_is_associative(a in arb_mat(2), b in arb_mat(2), cm in arb_mat(2)) {
            let left = kron(&kron(&a, &b), &cm);
            let right = kron(&a, &kron(&b, &cm));
            prop_assert!(left.max_abs_diff(&right) < 1e-12);
        }

        #[test]
        fn partial_trace_of_product(a in arb_mat(2), b in arb_mat(3)) {
            let k = kron(&a, &b);
            let pa = partial_trace(&k, 2, 3, Subsystem::A).unwrap();
            prop_assert!(pa.max_abs_diff(&a.scale(b.trace())) < 1e-12);
            let pb = partial_trace(&k, 2, 3, Subsystem::B).unwrap();
            prop_assert!(pb.max_abs_diff(&b.scale(a.trace())) < 1e-12);
            prop_assert!((pa.trace() - k.trace()).norm() < 1e-12);
        }

        #[test]
        fn eig_reconstructs_and_is_unitary(h in (2usize..7).prop_flat_map(arb_herm)) {
            let e = herm_eig(&h).unwrap();
            prop_assert!(e.reconstruct().max_abs_diff(&h) < 1e-10);
            let n = h.rows();
            let vv = &e.vectors.adjoint() * &e.vectors;
            prop_assert!(vv.max_abs_diff(&CMatrix::identity(n)) < 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn sqrt_squares_to_psd_part(h in (2usize..6).prop_flat_map(arb_herm)) {
            let s = mat_sqrt_psd(&h).unwrap();
            let p = project_psd(&h).unwrap();
            prop_assert!((&s * &s).max_abs_diff(&p) < 1e-8);
            let pp = project_psd(&p).unwrap();
            prop_assert!(pp.max_abs_diff(&p) < 1e-12);
        }

        #[test]
        fn log_exp_round_trip(a in arb_mat(4)) {
            // a a^dagger + 0.1 I has spectrum well above the floor
            let m = &(&a * &a.adjoint()) + &CMatrix::identity(4).scale_re(0.1);
            let back = mat_exp_herm(&mat_log_psd(&m, LOG_FLOOR).unwrap()).unwrap();
            prop_assert!(back.max_abs_diff(&m) < 1e-8);
        }

        #[test]
        fn vec_round_trip(m in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            proptest::collection::vec(arb_c(), r * c).prop_map(move |d| CMatrix::new(r, c, d).unwrap())
        })) {
            let back = unvec(&vec(&m), m.rows(), m.cols()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
