//! Dense complex and real matrices for the small per-frequency blocks.
//!
//! Every matrix in this crate is tiny (input/output dimensions, so a handful
//! of rows and columns) except for the truncated noise operators, which are
//! short and wide. Singular values come from one-sided Jacobi on the column
//! set, which keeps full relative accuracy for the smallest singular value —
//! the quantity the excitation certificates depend on.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Scalar> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex::new(T::one(), T::zero()));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// 1x1 matrix holding a single complex value.
    pub fn from_scalar(value: Complex<T>) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: Complex<T>) {
        self.data[r * self.cols + c] = value;
    }

    /// The single entry of a 1x1 matrix.
    pub fn scalar(&self) -> Complex<T> {
        assert!(self.rows == 1 && self.cols == 1, "matrix is not 1x1");
        self.data[0]
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, column: &[Complex<T>]) {
        assert_eq!(column.len(), self.rows);
        for (r, v) in column.iter().enumerate() {
            self.set(r, c, *v);
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.norm_sqr() == T::zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let cur = out.get(r, c);
                    out.set(r, c, cur + a * rhs.get(k, c));
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) + rhs.get(r, c))
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) - rhs.get(r, c))
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) * factor)
    }

    pub fn scale_real(&self, factor: T) -> Self {
        self.scale(Complex::new(factor, T::zero()))
    }

    pub fn trace(&self) -> Complex<T> {
        assert_eq!(self.rows, self.cols, "trace needs a square matrix");
        (0..self.rows).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self.get(i, i))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Hermitian symmetrization `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        self.add(&adj).scale_real(lit(0.5))
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(T::one());
        for r in 0..self.rows {
            for c in 0..self.cols {
                if (self.get(r, c) - self.get(c, r).conj()).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    /// Singular values in descending order, by one-sided Jacobi.
    pub fn singular_values(&self) -> Vec<T> {
        // Work on the taller orientation so columns never outnumber rows.
        let work = if self.rows >= self.cols { self.clone() } else { self.adjoint() };
        let n = work.cols;
        if n == 0 || work.rows == 0 {
            return vec![T::zero(); self.rows.min(self.cols)];
        }
        let mut cols: Vec<Vec<Complex<T>>> = (0..n).map(|c| work.column(c)).collect();
        let eps = T::epsilon();
        let max_sweeps = 64;
        for _ in 0..max_sweeps {
            let mut worst = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    let (alpha, beta, gamma) = column_gram(&cols[p], &cols[q]);
                    let scale = (alpha * beta).sqrt();
                    if scale == T::zero() {
                        continue;
                    }
                    let gnorm = gamma.norm();
                    worst = worst.max(gnorm / scale);
                    if gnorm <= scale * eps {
                        continue;
                    }
                    // Align the q column so the cross term becomes real,
                    // then apply the classic 2x2 Jacobi rotation.
                    let phase = gamma / Complex::new(gnorm, T::zero());
                    let tau = (beta - alpha) / (lit::<T>(2.0) * gnorm);
                    let t = if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    let phase_conj = phase.conj();
                    for i in 0..cols[p].len() {
                        let u = cols[p][i];
                        let v = cols[q][i] * phase_conj;
                        cols[p][i] = u * c - v * s;
                        cols[q][i] = u * s + v * c;
                    }
                }
            }
            if worst <= eps * lit(8.0) {
                break;
            }
        }
        let mut values: Vec<T> = cols
            .iter()
            .map(|col| {
                col.iter()
                    .map(|z| z.norm_sqr())
                    .fold(T::zero(), |a, b| a + b)
                    .sqrt()
            })
            .collect();
        values.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
        values
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> T {
        self.singular_values().first().copied().unwrap_or_else(T::zero)
    }

    pub fn smallest_singular_value(&self) -> T {
        self.singular_values().last().copied().unwrap_or_else(T::zero)
    }

    /// Spectral condition number; `None` when the matrix is singular.
    pub fn condition_number(&self) -> Option<T> {
        let sv = self.singular_values();
        let (largest, smallest) = (*sv.first()?, *sv.last()?);
        if smallest == T::zero() {
            None
        } else {
            Some(largest / smallest)
        }
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        assert_eq!(self.rows, self.cols, "inverse needs a square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut pivot_row = col;
            let mut pivot_mag = a.get(col, col).norm_sqr();
            for r in (col + 1)..n {
                let mag = a.get(r, col).norm_sqr();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = r;
                }
            }
            if pivot_mag == T::zero() {
                return Err(Error::SingularMatrix);
            }
            if pivot_row != col {
                for c in 0..n {
                    let (x, y) = (a.get(col, c), a.get(pivot_row, c));
                    a.set(col, c, y);
                    a.set(pivot_row, c, x);
                    let (x, y) = (inv.get(col, c), inv.get(pivot_row, c));
                    inv.set(col, c, y);
                    inv.set(pivot_row, c, x);
                }
            }
            let pivot = a.get(col, col);
            let pivot_inv = Complex::new(T::one(), T::zero()) / pivot;
            for c in 0..n {
                a.set(col, c, a.get(col, c) * pivot_inv);
                inv.set(col, c, inv.get(col, c) * pivot_inv);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a.get(r, col);
                if factor.norm_sqr() == T::zero() {
                    continue;
                }
                for c in 0..n {
                    let val = a.get(r, c) - factor * a.get(col, c);
                    a.set(r, c, val);
                    let val = inv.get(r, c) - factor * inv.get(col, c);
                    inv.set(r, c, val);
                }
            }
        }
        Ok(inv)
    }
}

fn column_gram<T: Scalar>(p: &[Complex<T>], q: &[Complex<T>]) -> (T, T, Complex<T>) {
    let mut alpha = T::zero();
    let mut beta = T::zero();
    let mut gamma = Complex::new(T::zero(), T::zero());
    for (a, b) in p.iter().zip(q.iter()) {
        alpha = alpha + a.norm_sqr();
        beta = beta + b.norm_sqr();
        gamma = gamma + a.conj() * *b;
    }
    (alpha, beta, gamma)
}

/// Dense row-major real matrix; used for lifted noise operators and
/// autocovariance blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> RMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity_scaled(n: usize, value: T) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { value } else { T::zero() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        self.data[r * self.cols + c] = value;
    }

    pub fn scalar(&self) -> T {
        assert!(self.rows == 1 && self.cols == 1, "matrix is not 1x1");
        self.data[0]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(x.iter()).map(|(&a, &b)| a * b).fold(T::zero(), |s, v| s + v)
            })
            .collect()
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) * factor)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols);
        Self::from_fn(self.rows, self.cols, |r, c| self.get(r, c) + rhs.get(r, c))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .map(|&v| v * v)
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn to_complex(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.rows, self.cols, |r, c| Complex::new(self.get(r, c), T::zero()))
    }

    pub fn operator_norm(&self) -> T {
        self.to_complex().operator_norm()
    }

    pub fn singular_values(&self) -> Vec<T> {
        self.to_complex().singular_values()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn singular_values_of_scalar() {
        let m = CMatrix::from_scalar(c64(3.0, 4.0));
        let sv = m.singular_values();
        assert!((sv[0] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut m = CMatrix::zeros(2, 2);
        m.set(0, 0, c64(0.0, 2.0));
        m.set(1, 1, c64(-0.5, 0.0));
        let sv = m.singular_values();
        assert!((sv[0] - 2.0).abs() < 1e-14);
        assert!((sv[1] - 0.5).abs() < 1e-14);
        assert!((m.condition_number().unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_of_rank_one() {
        // [1; 1] * [1, 1] has operator norm 2 and Frobenius norm 2.
        let m = CMatrix::from_fn(2, 2, |_, _| c64(1.0, 0.0));
        assert!((m.operator_norm() - 2.0).abs() < 1e-13);
        assert!(m.smallest_singular_value().abs() < 1e-13);
        assert!(m.condition_number().is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let m = CMatrix::from_fn(3, 3, |r, c| {
            c64((r * 3 + c) as f64 + if r == c { 5.0 } else { 0.0 }, (r as f64) - (c as f64))
        });
        let inv = m.inverse().unwrap();
        let prod = m.mul(&inv);
        let err = prod.sub(&CMatrix::identity(3)).max_abs();
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn inverse_of_singular_fails() {
        let m = CMatrix::from_fn(2, 2, |_, _| c64(1.0, 0.0));
        assert!(m.inverse().is_err());
    }

    #[test]
    fn hermitian_part_is_hermitian() {
        let m = CMatrix::from_fn(2, 2, |r, c| c64(r as f64, c as f64 + 1.0));
        assert!(m.hermitian_part().is_hermitian(1e-14));
    }

    proptest! {
        // Cross-check Jacobi singular values against the Gram-matrix route:
        // the eigenvalues of A* A for 2x2 come from the closed-form
        // characteristic polynomial.
        #[test]
        fn jacobi_matches_gram_eigenvalues(entries in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let m = CMatrix::from_fn(2, 2, |r, c| c64(entries[2 * (r * 2 + c)], entries[2 * (r * 2 + c) + 1]));
            let gram = m.adjoint().mul(&m);
            let a = gram.get(0, 0).re;
            let d = gram.get(1, 1).re;
            let b = gram.get(0, 1).norm_sqr();
            let mean = 0.5 * (a + d);
            let disc = (0.25 * (a - d) * (a - d) + b).sqrt();
            let lam_max = (mean + disc).max(0.0);
            let lam_min = (mean - disc).max(0.0);
            let sv = m.singular_values();
            let scale = lam_max.sqrt().max(1.0);
            prop_assert!((sv[0] - lam_max.sqrt()).abs() < 1e-9 * scale);
            prop_assert!((sv[1] - lam_min.sqrt()).abs() < 1e-9 * scale);
        }

        #[test]
        fn operator_norm_bounded_by_frobenius(entries in proptest::collection::vec(-5.0f64..5.0, 12)) {
            let m = CMatrix::from_fn(2, 3, |r, c| c64(entries[2 * (r * 3 + c)], entries[2 * (r * 3 + c) + 1]));
            prop_assert!(m.operator_norm() <= m.frobenius_norm() + 1e-12);
        }

        #[test]
        fn inverse_round_trips_on_random_matrices(entries in proptest::collection::vec(-3.0f64..3.0, 18)) {
            // Diagonal dominance keeps the samples comfortably invertible.
            let m = CMatrix::from_fn(3, 3, |r, c| {
                let z = c64(entries[2 * (r * 3 + c)], entries[2 * (r * 3 + c) + 1]);
                if r == c { z + c64(10.0, 0.0) } else { z }
            });
            let inv = m.inverse().unwrap();
            let err = m.mul(&inv).sub(&CMatrix::identity(3)).max_abs();
            prop_assert!(err < 1e-12, "round trip error {err}");
        }
    }

    #[test]
    fn rmatrix_matvec() {
        let m = RMatrix::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let y = m.matvec(&[1.0, 2.0, 3.0]);
        assert_eq!(y, vec![8.0, 26.0]);
    }
}
