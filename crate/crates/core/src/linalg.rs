//! Small linear-algebra layer shared by the solvers.
//!
//! Lattice operators and Liouvillians are stored as compressed sparse rows
//! ([`SparseMatrix`]); local operators and gates are dense [`faer::Mat`]s.
//! Kronecker products follow the "first factor is slowest-varying" rule, so
//! `kron(A, B)[(i * nb + k, j * mb + l)] = A[(i, j)] * B[(k, l)]`.

use std::ops::{Add, Mul, Sub};

use faer::Mat;
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Complex sparse matrix in CSR layout. Column indices within a row are
/// sorted and unique; explicit zeros are dropped on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![ONE; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets<T>(nrows: usize, ncols: usize, triplets: T) -> Self
    where
        T: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut k = 0;
        while k < entries.len() {
            let (r, c, mut v) = entries[k];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            k += 1;
            while k < entries.len() && entries[k].0 == r && entries[k].1 == c {
                v += entries[k].2;
                k += 1;
            }
            if v != ZERO {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn from_dense(m: &Mat<C64>) -> Self {
        Self::from_triplets(
            m.nrows(),
            m.ncols(),
            (0..m.nrows())
                .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, m[(i, j)])),
        )
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over stored entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => ZERO,
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == ZERO {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(r, c, v)| (c, r, v)))
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).sum()
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn to_faer(&self) -> faer::sparse::SparseColMat<usize, C64> {
        let triplets: Vec<_> =
            self.iter().map(|(r, c, v)| faer::sparse::Triplet::new(r, c, v)).collect();
        faer::sparse::SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .expect("valid CSR converts to CSC")
    }

    /// `kron(a, b)` with `a` on the slow index.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let (nb, mb) = (b.nrows, b.ncols);
        let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
        for (i, j, x) in a.iter() {
            for (k, l, y) in b.iter() {
                triplets.push((i * nb + k, j * mb + l, x * y));
            }
        }
        Self::from_triplets(a.nrows * nb, a.ncols * mb, triplets)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self - other).norm_max()
    }
}

impl Mul for &SparseMatrix {
    type Output = SparseMatrix;

    fn mul(self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, rhs.nrows, "dimension mismatch in sparse product");
        let mut triplets = Vec::new();
        let mut acc = vec![ZERO; rhs.ncols];
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if acc[c] == ZERO {
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &touched {
                triplets.push((r, c, acc[c]));
                acc[c] = ZERO;
            }
            touched.clear();
        }
        SparseMatrix::from_triplets(self.nrows, rhs.ncols, triplets)
    }
}

impl Add for &SparseMatrix {
    type Output = SparseMatrix;

    fn add(self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        SparseMatrix::from_triplets(self.nrows, self.ncols, self.iter().chain(rhs.iter()))
    }
}

impl Sub for &SparseMatrix {
    type Output = SparseMatrix;

    fn sub(self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        SparseMatrix::from_triplets(
            self.nrows,
            self.ncols,
            self.iter().chain(rhs.iter().map(|(r, c, v)| (r, c, -v))),
        )
    }
}

/// Dense Kronecker product, `a` slowest.
pub fn kron(a: &Mat<C64>, b: &Mat<C64>) -> Mat<C64> {
    let (nb, mb) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * nb, a.ncols() * mb, |r, c| a[(r / nb, c / mb)] * b[(r % nb, c % mb)])
}

pub fn norm_one(m: &Mat<C64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat<C64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    max_abs(&(a - b))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Used for the local and bond propagators, which are at most a few hundred
/// rows; the scaled argument has one-norm below 1/4, where 20 Taylor terms are
/// far below double precision.
pub fn expm(a: &Mat<C64>) -> Mat<C64> {
    assert_eq!(a.nrows(), a.ncols(), "expm of non-square matrix");
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled = a * faer::Scale(C64::new(scale, 0.0));

    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled * faer::Scale(C64::new(1.0 / k as f64, 0.0));
        result += &term;
        if max_abs(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 0, c(1.0)), (1, 0, c(-1.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn sparse_product_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, c(1.0)), (0, 2, I), (1, 1, c(2.0))]);
        let b = SparseMatrix::from_triplets(3, 2, vec![(0, 1, c(3.0)), (2, 0, c(1.0)), (1, 1, -I)]);
        let dense = &a.to_dense() * &b.to_dense();
        assert!(max_abs_diff(&(&a * &b).to_dense(), &dense) < 1e-15);
    }

    #[test]
    fn kron_is_slow_first() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 1, c(1.0))]);
        let b = SparseMatrix::identity(3);
        let k = SparseMatrix::kron(&a, &b);
        assert_eq!(k.get(0, 3), ONE);
        assert_eq!(k.get(2, 5), ONE);
        assert_eq!(k.nnz(), 3);
        assert!(max_abs_diff(&k.to_dense(), &kron(&a.to_dense(), &b.to_dense())) < 1e-15);
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(-i θ σx) = cos θ − i sin θ σx
        let theta = 3.7;
        let gen = Mat::from_fn(2, 2, |i, j| if i != j { C64::new(0.0, -theta) } else { ZERO });
        let u = expm(&gen);
        assert!((u[(0, 0)] - c(theta.cos())).norm() < 1e-13);
        assert!((u[(0, 1)] - C64::new(0.0, -theta.sin())).norm() < 1e-13);
    }

    #[test]
    fn expm_of_nilpotent_is_exact() {
        let n = Mat::from_fn(3, 3, |i, j| if j == i + 1 { c(2.0) } else { ZERO });
        let e = expm(&n);
        assert!((e[(0, 2)] - c(2.0)).norm() < 1e-14);
        assert!((e[(0, 1)] - c(2.0)).norm() < 1e-14);
    }
}
