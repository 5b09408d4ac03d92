//! Small dense matrices and the scaled (unit-norm matrix, log-scale) representation.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::scalar::{lit, Real};

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}[", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:?}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Panics if rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn scalar(v: T) -> Self {
        Mat {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j && self[(i, j)] != T::zero() {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Singular values in decreasing order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<T> {
        if self.rows == 0 || self.cols == 0 {
            return Vec::new();
        }
        if self.rows < self.cols {
            return self.transpose().singular_values();
        }
        if self.cols == 1 {
            let s: T = self.data.iter().map(|&x| x * x).sum();
            return vec![s.sqrt()];
        }
        // Pre-scale to keep squared column sums in range.
        let scale = self.max_abs();
        if scale == T::zero() {
            return vec![T::zero(); self.cols];
        }
        let mut a = self.scale(scale.recip());
        let (m, n) = (a.rows, a.cols);
        let eps = T::epsilon();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let mut alpha = T::zero();
                    let mut beta = T::zero();
                    let mut gamma = T::zero();
                    for i in 0..m {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        alpha = alpha + ap * ap;
                        beta = beta + aq * aq;
                        gamma = gamma + ap * aq;
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (lit::<T>(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = (T::one() + t * t).sqrt().recip();
                    let s = c * t;
                    for i in 0..m {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        a[(i, p)] = c * ap - s * aq;
                        a[(i, q)] = s * ap + c * aq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = (0..n)
            .map(|j| {
                let s: T = (0..m).map(|i| a[(i, j)] * a[(i, j)]).sum();
                s.sqrt() * scale
            })
            .collect();
        sv.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> T {
        if self.rows == 1 && self.cols == 1 {
            return self.data[0].abs();
        }
        if self.is_diagonal() && self.is_square() {
            return self.max_abs();
        }
        self.singular_values().first().copied().unwrap_or(T::zero())
    }

    /// Smallest singular value (of the square or tall matrix).
    pub fn min_singular_value(&self) -> T {
        self.singular_values().last().copied().unwrap_or(T::zero())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Mat<T>> {
        assert!(self.is_square(), "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[(r, col)].abs() > a[(piv, col)].abs() {
                    piv = r;
                }
            }
            if a[(piv, col)] == T::zero() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    inv.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)].recip();
            for j in 0..n {
                a[(col, j)] = a[(col, j)] * d;
                inv[(col, j)] = inv[(col, j)] * d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                    inv[(r, j)] = inv[(r, j)] - f * inv[(col, j)];
                }
            }
        }
        if inv.is_finite() {
            Some(inv)
        } else {
            None
        }
    }

    /// Orthonormal basis (as columns) of the column space, by modified
    /// Gram-Schmidt with one reorthogonalization pass. Columns whose residual
    /// falls below `tol` relative to the largest column are dropped.
    pub fn column_space_basis(&self, tol: T) -> Mat<T> {
        let m = self.rows;
        let ref_norm = (0..self.cols)
            .map(|j| (0..m).map(|i| self[(i, j)] * self[(i, j)]).sum::<T>().sqrt())
            .fold(T::zero(), T::max);
        let mut basis: Vec<Vec<T>> = Vec::new();
        if ref_norm == T::zero() {
            return Mat::zeros(m, 0);
        }
        for j in 0..self.cols {
            let mut v: Vec<T> = (0..m).map(|i| self[(i, j)]).collect();
            for _ in 0..2 {
                for b in &basis {
                    let dot: T = v.iter().zip(b).map(|(&x, &y)| x * y).sum();
                    for (x, &y) in v.iter_mut().zip(b) {
                        *x = *x - dot * y;
                    }
                }
            }
            let norm: T = v.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > tol * ref_norm {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        let mut q = Mat::zeros(m, basis.len());
        for (j, b) in basis.iter().enumerate() {
            for i in 0..m {
                q[(i, j)] = b[i];
            }
        }
        q
    }

    /// Numerical rank with a threshold relative to the largest singular value.
    pub fn rank(&self, rel_tol: T) -> usize {
        let sv = self.singular_values();
        let top = match sv.first() {
            Some(&s) if s > T::zero() => s,
            _ => return 0,
        };
        sv.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// `e^{log_scale} · mat` with `mat` at unit spectral norm (or zero, with
/// `log_scale = -inf`).
#[derive(Clone, Debug, PartialEq)]
pub struct Scaled<T> {
    pub mat: Mat<T>,
    pub log_scale: T,
}

impl<T: Real> Scaled<T> {
    /// Normalizes `e^{log_scale} · mat` to unit spectral norm.
    pub fn new(mat: Mat<T>, log_scale: T) -> Self {
        let norm = mat.spectral_norm();
        if norm == T::zero() || !log_scale.is_finite() && log_scale < T::zero() {
            return Scaled {
                mat: Mat::zeros(mat.rows(), mat.cols()),
                log_scale: T::neg_infinity(),
            };
        }
        Scaled {
            mat: mat.scale(norm.recip()),
            log_scale: log_scale + norm.ln(),
        }
    }

    pub fn from_dense(mat: Mat<T>) -> Self {
        Self::new(mat, T::zero())
    }

    pub fn identity(d: usize) -> Self {
        Scaled {
            mat: Mat::identity(d),
            log_scale: T::zero(),
        }
    }

    /// `log ‖·‖`; `-inf` for the zero operator.
    pub fn log_norm(&self) -> T {
        self.log_scale
    }

    pub fn is_zero(&self) -> bool {
        self.log_scale == T::neg_infinity()
    }

    /// Product `self · other`, renormalized.
    pub fn mul(&self, other: &Scaled<T>) -> Scaled<T> {
        if self.is_zero() || other.is_zero() {
            return Scaled {
                mat: Mat::zeros(self.mat.rows(), other.mat.cols()),
                log_scale: T::neg_infinity(),
            };
        }
        Scaled::new(self.mat.matmul(&other.mat), self.log_scale + other.log_scale)
    }

    /// Multiplies by a plain matrix on the right.
    pub fn mul_dense(&self, other: &Mat<T>) -> Scaled<T> {
        if self.is_zero() {
            return Scaled {
                mat: Mat::zeros(self.mat.rows(), other.cols()),
                log_scale: T::neg_infinity(),
            };
        }
        Scaled::new(self.mat.matmul(other), self.log_scale)
    }

    /// Multiplies by a plain matrix on the left.
    pub fn dense_mul(other: &Mat<T>, s: &Scaled<T>) -> Scaled<T> {
        if s.is_zero() {
            return Scaled {
                mat: Mat::zeros(other.rows(), s.mat.cols()),
                log_scale: T::neg_infinity(),
            };
        }
        Scaled::new(other.matmul(&s.mat), s.log_scale)
    }

    /// Shifts the log scale.
    pub fn shifted(&self, delta: T) -> Scaled<T> {
        Scaled {
            mat: self.mat.clone(),
            log_scale: self.log_scale + delta,
        }
    }

    /// Inverse of a square scaled matrix, `None` if singular.
    pub fn inverse(&self) -> Option<Scaled<T>> {
        if self.is_zero() {
            return None;
        }
        let inv = self.mat.inverse()?;
        Some(Scaled::new(inv, -self.log_scale))
    }

    /// Dense value `e^{s}·M`; may overflow.
    pub fn to_dense(&self) -> Mat<T> {
        if self.is_zero() {
            return self.mat.clone();
        }
        self.mat.scale(self.log_scale.exp())
    }

    /// `‖self − other‖ / max(‖self‖, ‖other‖)`, computed in scaled form.
    pub fn relative_distance(&self, other: &Scaled<T>) -> T {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return T::zero(),
            (true, false) | (false, true) => return T::one(),
            _ => {}
        }
        let top = self.log_scale.max(other.log_scale);
        let a = self.mat.scale((self.log_scale - top).exp());
        let b = other.mat.scale((other.log_scale - top).exp());
        a.sub(&b).spectral_norm()
    }
}

/// Signed scalar stored as `(sign, log|value|)`; zero has `log_abs = -inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar<T> {
    pub log_abs: T,
    pub negative: bool,
}

impl<T: Real> LogScalar<T> {
    pub fn positive(log_abs: T) -> Self {
        LogScalar {
            log_abs,
            negative: false,
        }
    }

    pub fn from_value(v: T) -> Self {
        LogScalar {
            log_abs: v.abs().ln(),
            negative: v < T::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == T::neg_infinity()
    }

    pub fn mul(self, other: Self) -> Self {
        LogScalar {
            log_abs: self.log_abs + other.log_abs,
            negative: self.negative != other.negative,
        }
    }

    pub fn recip(self) -> Self {
        LogScalar {
            log_abs: -self.log_abs,
            negative: self.negative,
        }
    }

    pub fn value(self) -> T {
        let v = self.log_abs.exp();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

/// Scaled diagonal matrix from per-coordinate log scalars.
pub fn scaled_diag<T: Real>(entries: &[LogScalar<T>]) -> Scaled<T> {
    let top = entries
        .iter()
        .map(|e| e.log_abs)
        .fold(T::neg_infinity(), T::max);
    if top == T::neg_infinity() {
        return Scaled {
            mat: Mat::zeros(entries.len(), entries.len()),
            log_scale: T::neg_infinity(),
        };
    }
    let d: Vec<T> = entries
        .iter()
        .map(|e| {
            let v = (e.log_abs - top).exp();
            if e.negative {
                -v
            } else {
                v
            }
        })
        .collect();
    Scaled {
        mat: Mat::from_diag(&d),
        log_scale: top,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_known_matrix() {
        let m = Mat::from_rows(&[vec![3.0, 0.0], vec![4.0, 5.0]]);
        let sv = m.singular_values();
        // Eigenvalues of MᵀM = [[25,20],[20,25]] are 45 and 5.
        assert!((sv[0] - 45f64.sqrt()).abs() < 1e-13);
        assert!((sv[1] - 5f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Mat::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        assert!(id.sub(&Mat::identity(3)).max_abs() < 1e-14);
        assert!(Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).inverse().is_none());
    }

    #[test]
    fn scaled_products_do_not_overflow() {
        let big = Scaled::new(Mat::scalar(1.0f64), 600.0);
        let p = big.mul(&big).mul(&big);
        assert_eq!(p.log_norm(), 1800.0);
        assert_eq!(p.mat[(0, 0)], 1.0);
    }

    #[test]
    fn column_basis_of_projector_complement() {
        let p = Mat::from_rows(&[vec![1.0f64, 1.0], vec![0.0, 0.0]]);
        let q = Mat::identity(2).sub(&p).column_space_basis(1e-10);
        assert_eq!(q.cols(), 1);
        let n: f64 = q[(0, 0)].powi(2) + q[(1, 0)].powi(2);
        assert!((n - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diag_scaling_keeps_signs() {
        let s = scaled_diag(&[LogScalar::from_value(-2.0f64), LogScalar::from_value(0.5)]);
        assert!((s.log_scale - 2f64.ln()).abs() < 1e-15);
        assert_eq!(s.mat[(0, 0)], -1.0);
        assert!((s.mat[(1, 1)] - 0.25).abs() < 1e-15);
    }
}
