//! Small dense complex linear algebra.
//!
//! Everything here works on row-major [`CMatrix`] values of modest size
//! (a few hundred rows at most). The eigen-solvers are the textbook ones:
//! cyclic complex Jacobi for Hermitian matrices and a shifted Hessenberg QR
//! iteration for general spectra.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::float::{ComplexExt, Float};

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `e^{iθ}`.
pub fn cis(theta: f64) -> C64 {
    C64::new(Float::cos(theta), Float::sin(theta))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    /// Builds a matrix from row vectors; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(CMatrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn from_real(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        CMatrix {
            rows,
            cols,
            data: values.iter().map(|&x| C64::new(x, 0.0)).collect(),
        }
    }

    pub fn diagonal(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.diag().into_iter().sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.modulus()))
    }

    pub fn frobenius(&self) -> f64 {
        Float::sqrt(self.data.iter().map(|z| z.norm_sqr()).sum::<f64>())
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| {
            self[(i / r2, j / c2)] * other[(i % r2, j % c2)]
        })
    }

    /// `‖A A† − I‖_max`; `f64::INFINITY` for non-square input.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (self * &self.adjoint())
            .sub(&CMatrix::identity(self.rows))
            .max_abs()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &CMatrix) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::add(self, rhs)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::sub(self, rhs)
    }
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigen-decomposition `A = V diag(λ) V†` of a Hermitian matrix by cyclic
/// complex Jacobi rotations. Eigenvalues are returned in ascending order
/// with matching eigenvector columns.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut m = a.clone();
    // symmetrize against rounding in the input
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if Float::sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.modulus();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + Float::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + Float::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / Float::sqrt(1.0 + t * t);
                let s = t * c;
                // J = D P with D_qq = conj(phase); columns p, q of J:
                let jpp = C64::new(c, 0.0);
                let jqp = -phase.conj() * s;
                let jpq = C64::new(s, 0.0);
                let jqq = phase.conj() * c;
                // M <- M J
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * jpp + mkq * jqp;
                    m[(k, q)] = mkp * jpq + mkq * jqq;
                }
                // M <- J† M
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = jpp.conj() * mpk + jqp.conj() * mqk;
                    m[(q, k)] = jpq.conj() * mpk + jqq.conj() * mqk;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = C64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = C64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * jpp + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * jqq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((values, vectors))
}

/// Applies `f` to the spectrum of a Hermitian matrix: `V f(Λ) V†`.
pub fn hermitian_function(a: &CMatrix, f: impl Fn(f64) -> C64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(a)?;
    let n = vals.len();
    let fv: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    Ok(CMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|k| vecs[(i, k)] * fv[k] * vecs[(j, k)].conj())
            .sum()
    }))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    hermitian_function(a, |x| C64::new(Float::sqrt(x.max(0.0)), 0.0))
}

/// `exp(G)` for anti-Hermitian `G`, computed from the spectrum of `iG`.
pub fn expm_antihermitian(g: &CMatrix) -> Result<CMatrix> {
    let h = g.scale(C64::new(0.0, 1.0));
    hermitian_function(&h, |x| cis(-x))
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut inv = CMatrix::identity(n);
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[(i, col)].modulus().total_cmp(&m[(j, col)].modulus()))
            .unwrap_or(col);
        if m[(pivot, col)].modulus() <= 1e-14 * scale {
            return Err(Error::Degenerate("singular matrix".into()));
        }
        if pivot != col {
            for k in 0..n {
                let t = m[(col, k)];
                m[(col, k)] = m[(pivot, k)];
                m[(pivot, k)] = t;
                let t = inv[(col, k)];
                inv[(col, k)] = inv[(pivot, k)];
                inv[(pivot, k)] = t;
            }
        }
        let p = m[(col, col)].inv();
        for k in 0..n {
            m[(col, k)] *= p;
            inv[(col, k)] *= p;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = m[(i, col)];
            if f == ZERO {
                continue;
            }
            for k in 0..n {
                let mk = m[(col, k)];
                let ik = inv[(col, k)];
                m[(i, k)] -= f * mk;
                inv[(i, k)] -= f * ik;
            }
        }
    }
    Ok(inv)
}

/// Ridge-regularized least squares `min ‖A x − b‖² + ε‖x‖²` through the
/// normal equations. `ridge` is relative to the largest diagonal entry of
/// `A†A`, so rank-deficient systems get the minimum-norm-like solution.
pub fn least_squares(a: &CMatrix, b: &[C64], ridge: f64) -> Result<Vec<C64>> {
    assert_eq!(a.rows, b.len());
    let ah = a.adjoint();
    let mut g = &ah * a;
    let dmax = g.diag().iter().fold(0.0f64, |m, z| m.max(z.re));
    let eps = ridge * dmax.max(f64::MIN_POSITIVE);
    for i in 0..g.rows {
        g[(i, i)] += eps;
    }
    let rhs = ah.mul_vec(b);
    Ok(inverse(&g)?.mul_vec(&rhs))
}

/// Completes the orthonormal rows of `top` (k×n) to an n×n unitary by
/// Gram–Schmidt against the standard basis.
pub fn complete_unitary(top: &CMatrix) -> Result<CMatrix> {
    let (k, n) = (top.rows, top.cols);
    if k > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: k,
        });
    }
    let mut rows: Vec<Vec<C64>> = (0..k).map(|i| top.row(i).to_vec()).collect();
    for e in 0..n {
        if rows.len() == n {
            break;
        }
        let mut v = vec![ZERO; n];
        v[e] = ONE;
        // two passes of classical Gram–Schmidt for stability
        for _ in 0..2 {
            for r in &rows {
                // rows are treated as vectors r with inner product r·conj(v)
                let c: C64 = r.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, ri) in v.iter_mut().zip(r) {
                    *vi -= c * ri;
                }
            }
        }
        let nrm = Float::sqrt(norm_sqr(&v));
        if nrm > 1e-8 {
            rows.push(v.iter().map(|z| z / nrm).collect());
        }
    }
    if rows.len() != n {
        return Err(Error::SingularCompletion);
    }
    let full = CMatrix::from_rows(&rows)?;
    if full.unitarity_defect() > 1e-10 {
        return Err(Error::SingularCompletion);
    }
    Ok(full)
}

/// Eigenvalues of an upper Hessenberg matrix by the single-shift complex QR
/// iteration with Wilkinson shifts and bottom deflation.
pub fn hessenberg_eigenvalues(h: &CMatrix) -> Result<Vec<C64>> {
    if !h.is_square() {
        return Err(Error::NotSquare {
            rows: h.rows,
            cols: h.cols,
        });
    }
    let mut a = h.clone();
    let mut hi = a.rows;
    let mut out = Vec::with_capacity(hi);
    let mut stalled = 0usize;
    let mut total = 0usize;
    while hi > 0 {
        if hi == 1 {
            out.push(a[(0, 0)]);
            break;
        }
        // locate the start of the active unreduced block
        let mut lo = hi - 1;
        while lo > 0 {
            let s = a[(lo - 1, lo - 1)].modulus() + a[(lo, lo)].modulus();
            if a[(lo, lo - 1)].modulus() <= f64::EPSILON * s.max(f64::MIN_POSITIVE) {
                a[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi - 1 {
            out.push(a[(hi - 1, hi - 1)]);
            hi -= 1;
            stalled = 0;
            continue;
        }
        total += 1;
        stalled += 1;
        if total > 10_000 {
            return Err(Error::RootFinding {
                condition: f64::INFINITY,
            });
        }
        let shift = if stalled % 11 == 10 {
            // exceptional shift
            a[(hi - 1, hi - 1)] + C64::new(a[(hi - 1, hi - 2)].modulus() * 0.75, 0.0)
        } else {
            wilkinson_shift(
                a[(hi - 2, hi - 2)],
                a[(hi - 2, hi - 1)],
                a[(hi - 1, hi - 2)],
                a[(hi - 1, hi - 1)],
            )
        };
        for i in lo..hi {
            a[(i, i)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - lo - 1);
        for k in lo..hi - 1 {
            let x = a[(k, k)];
            let y = a[(k + 1, k)];
            let r = Float::sqrt(x.norm_sqr() + y.norm_sqr());
            let (c, s) = if r == 0.0 {
                (ONE, ZERO)
            } else {
                (x / r, y / r)
            };
            // G = [[c*, s*], [-s, c]] applied to rows k, k+1
            for j in k..hi {
                let u = a[(k, j)];
                let w = a[(k + 1, j)];
                a[(k, j)] = c.conj() * u + s.conj() * w;
                a[(k + 1, j)] = -s * u + c * w;
            }
            rots.push((c, s));
        }
        for (idx, k) in (lo..hi - 1).enumerate() {
            let (c, s) = rots[idx];
            // multiply on the right by G†
            for i in lo..(k + 2).min(hi) {
                let u = a[(i, k)];
                let w = a[(i, k + 1)];
                a[(i, k)] = u * c + w * s;
                a[(i, k + 1)] = -u * s.conj() + w * c.conj();
            }
        }
        for i in lo..hi {
            a[(i, i)] += shift;
        }
    }
    Ok(out)
}

fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr * 0.25 - det).csqrt();
    let l1 = tr * 0.5 + disc;
    let l2 = tr * 0.5 - disc;
    if (l1 - d).modulus() < (l2 - d).modulus() {
        l1
    } else {
        l2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        let a = CMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let (vals, vecs) = hermitian_eigen(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
        let recon =
            &(&vecs * &CMatrix::diagonal(&[c(vals[0], 0.0), c(vals[1], 0.0)])) * &vecs.adjoint();
        assert!(recon.sub(&a).max_abs() < 1e-14);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = CMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 0.0), c(3.0, 1.0), c(1.0, 0.0)],
            vec![c(2.0, 0.0), c(0.0, 0.0), c(1.0, 1.0)],
        ])
        .unwrap();
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).sub(&CMatrix::identity(3)).max_abs() < 1e-14);
    }

    #[test]
    fn companion_roots() {
        // (x-1)(x-2i)(x+3) = x^3 + (2-2i)x^2 + (-3-4i)x + 6i
        let coeffs = [c(0.0, 6.0), c(-3.0, -4.0), c(2.0, -2.0)];
        let mut comp = CMatrix::zeros(3, 3);
        for i in 1..3 {
            comp[(i, i - 1)] = ONE;
        }
        for i in 0..3 {
            comp[(i, 2)] = -coeffs[i];
        }
        let mut roots = hessenberg_eigenvalues(&comp).unwrap();
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let want = [c(-3.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)];
        for (r, w) in roots.iter().zip(&want) {
            assert!((r - w).modulus() < 1e-10, "{r} vs {w}");
        }
    }

    #[test]
    fn completion_is_unitary() {
        let s = 1.0 / 2f64.sqrt();
        let top = CMatrix::from_rows(&[vec![c(s, 0.0), c(0.0, s), ZERO]]).unwrap();
        let u = complete_unitary(&top).unwrap();
        assert!(u.unitarity_defect() < 1e-14);
        assert_eq!(u.row(0), top.row(0));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let g = CMatrix::from_real(2, 2, &[0.0, -0.3, 0.3, 0.0]);
        let e = expm_antihermitian(&g).unwrap();
        assert!((e[(0, 0)].re - 0.3f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - 0.3f64.sin()).abs() < 1e-14);
    }
}
