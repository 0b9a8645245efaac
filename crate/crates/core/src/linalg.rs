//! Dense square-matrix helpers: Cholesky factorization and symmetric
//! eigendecomposition (cyclic Jacobi), generic over [`Scalar`].

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major `d x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![T::zero(); d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); d])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_row_major(d: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                got: data.len(),
            });
        }
        Ok(Self { d, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let d = rows.len();
        let mut data = Vec::with_capacity(d * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { d, data })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.d).map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.d);
        for i in 0..self.d {
            for j in 0..self.d {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.d, other.d, "matmul dimension mismatch");
        let d = self.d;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * d..(i + 1) * d];
                for (o, &b) in dst.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            d: self.d,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            d: self.d,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn add_to_diagonal(&mut self, v: T) {
        for i in 0..self.d {
            self[(i, i)] += v;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.d).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + A^T) / 2`.
    pub fn symmetrize(&mut self) {
        let half = T::from_f64_lossy(0.5);
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                let v = half * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        self.data
            .chunks(self.d)
            .map(|r| r.iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.d + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.d + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^T = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    lower: SquareMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive-definite matrix; only the lower triangle is read.
    pub fn new(a: &SquareMatrix<T>) -> Result<Self> {
        let d = a.dim();
        let mut l = SquareMatrix::zeros(d);
        for j in 0..d {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..d {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &SquareMatrix<T> {
        &self.lower
    }

    /// `log det A = 2 * sum(log L_ii)`.
    pub fn log_det(&self) -> T {
        let two = T::one() + T::one();
        two * (0..self.lower.dim()).map(|i| self.lower[(i, i)].ln()).sum::<T>()
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let d = self.lower.dim();
        for i in 0..d {
            let row = self.lower.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// `x^T A^{-1} x`, via one triangular solve into `scratch`.
    pub fn mahalanobis_sq(&self, x: &[T], scratch: &mut [T]) -> T {
        scratch.copy_from_slice(x);
        self.solve_lower_in_place(scratch);
        scratch.iter().map(|&v| v * v).sum()
    }

    /// `L z`, mapping a standard-normal vector to one with covariance `A`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let d = self.lower.dim();
        (0..d)
            .map(|i| {
                let row = self.lower.row(i);
                (0..=i).map(|k| row[k] * z[k]).sum()
            })
            .collect()
    }
}

/// Eigenvalues (descending) and matching unit eigenvectors (columns of
/// `vectors`) of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: SquareMatrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
    pub fn new(a: &SquareMatrix<T>) -> Self {
        let d = a.dim();
        let mut m = a.clone();
        m.symmetrize();
        let mut v = SquareMatrix::identity(d);
        let eps = T::epsilon();
        let scale = m.frobenius_norm();

        for _sweep in 0..100 {
            let off: T = (0..d)
                .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| m[(i, j)] * m[(i, j)])
                .sum::<T>()
                .sqrt();
            if off <= eps * scale || off == T::zero() {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let two = T::one() + T::one();
                    let theta = (aqq - app) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..d {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..d {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..d {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| m[(b, b)].partial_cmp(&m[(a, a)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let mut vectors = SquareMatrix::zeros(d);
        for (col, &src) in order.iter().enumerate() {
            for r in 0..d {
                vectors[(r, col)] = v[(r, src)];
            }
        }
        Self { values, vectors }
    }

    pub fn vector(&self, i: usize) -> Vec<T> {
        (0..self.vectors.dim()).map(|r| self.vectors[(r, i)]).collect()
    }

    /// `V f(Λ) V^T`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> SquareMatrix<T> {
        let d = self.vectors.dim();
        let fv: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = SquareMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let s: T = (0..d).map(|k| self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}
