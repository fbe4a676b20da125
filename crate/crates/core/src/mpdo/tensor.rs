use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{C64, ZERO};

/// Three-index site tensor `(left, phys, right)`, stored row-major so that
/// both the `(left·phys) × right` and `left × (phys·right)` matricizations
/// are plain reinterpretations of `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    phys: usize,
    right: usize,
    data: Vec<f64>,
}

impl SiteTensor {
    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self { left, phys, right, data: vec![0.0; left * phys * right] }
    }

    pub fn from_data(left: usize, phys: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != left * phys * right {
            return Err(Error::DimensionMismatch { expected: left * phys * right, found: data.len() });
        }
        Ok(Self { left, phys, right, data })
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn phys(&self) -> usize {
        self.phys
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, l: usize, s: usize, r: usize) -> f64 {
        self.data[(l * self.phys + s) * self.right + r]
    }

    #[inline]
    pub fn set(&mut self, l: usize, s: usize, r: usize, v: f64) {
        self.data[(l * self.phys + s) * self.right + r] = v;
    }

    pub(crate) fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    fn left_matrix(&self) -> Mat<f64> {
        let cols = self.right;
        Mat::from_fn(self.left * self.phys, cols, |i, j| self.data[i * cols + j])
    }

    fn right_matrix(&self) -> Mat<f64> {
        let cols = self.phys * self.right;
        Mat::from_fn(self.left, cols, |i, j| self.data[i * cols + j])
    }

    fn from_left_matrix(m: &Mat<f64>, phys: usize) -> Self {
        let (rows, right) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(rows * right);
        for i in 0..rows {
            for j in 0..right {
                data.push(m[(i, j)]);
            }
        }
        Self { left: rows / phys, phys, right, data }
    }

    fn from_right_matrix(m: &Mat<f64>, phys: usize) -> Self {
        let (left, cols) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(left * cols);
        for i in 0..left {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right: cols / phys, data }
    }

    /// `env'[r] = Σ_{l,s} env[l] v[s] A[l,s,r]`.
    pub(crate) fn contract_left(&self, env: &[C64], v: &[C64]) -> Vec<C64> {
        debug_assert_eq!(env.len(), self.left);
        debug_assert_eq!(v.len(), self.phys);
        let mut out = vec![ZERO; self.right];
        for (l, &e) in env.iter().enumerate() {
            if e == ZERO {
                continue;
            }
            for (s, &w) in v.iter().enumerate() {
                if w == ZERO {
                    continue;
                }
                let f = e * w;
                let base = (l * self.phys + s) * self.right;
                for (r, slot) in out.iter_mut().enumerate() {
                    *slot += f * self.data[base + r];
                }
            }
        }
        out
    }

    /// The tensor with its physical index mapped back to the column-stacked
    /// `|a><b|` superindex.
    pub(crate) fn to_standard(&self, d: usize) -> StandardTensor {
        let mut data = Vec::with_capacity(self.data.len());
        let mut coords = vec![0.0; self.phys];
        for l in 0..self.left {
            let mut block = vec![ZERO; self.phys * self.right];
            for r in 0..self.right {
                for (k, c) in coords.iter_mut().enumerate() {
                    *c = self.get(l, k, r);
                }
                for (s, v) in super::basis::standard_vector(&coords, d).into_iter().enumerate() {
                    block[s * self.right + r] = v;
                }
            }
            data.extend(block);
        }
        StandardTensor { phys: self.phys, right: self.right, data }
    }

    /// `A = Q R` over the `(left·phys) × right` matricization.
    pub(crate) fn left_qr(&self) -> (Self, Mat<f64>) {
        let m = self.left_matrix();
        let qr = m.qr();
        let q = qr.compute_thin_Q();
        let r = qr.thin_R().to_owned();
        (Self::from_left_matrix(&q, self.phys), r)
    }

    /// `A = L Q` over the `left × (phys·right)` matricization, `Q` with
    /// orthonormal rows.
    pub(crate) fn right_lq(&self) -> (Mat<f64>, Self) {
        let m = self.right_matrix();
        let qr = m.adjoint().to_owned().qr();
        let q = qr.compute_thin_Q().adjoint().to_owned();
        let l = qr.thin_R().adjoint().to_owned();
        (l, Self::from_right_matrix(&q, self.phys))
    }

    /// `R · A` contracting `R`'s columns with the left bond.
    pub(crate) fn absorb_left(&self, r: &Mat<f64>) -> Self {
        let prod = r * self.right_matrix();
        Self::from_right_matrix(&prod, self.phys)
    }

    /// `A · L` contracting the right bond with `L`'s rows.
    pub(crate) fn absorb_right(&self, l: &Mat<f64>) -> Self {
        let prod = self.left_matrix() * l;
        Self::from_left_matrix(&prod, self.phys)
    }

    /// `A'[l,s',r] = Σ_s G[s',s] A[l,s,r]`.
    pub(crate) fn apply_site_gate(&self, gate: &Mat<f64>) -> Self {
        let mut out = Self::zeros(self.left, self.phys, self.right);
        for l in 0..self.left {
            for sp in 0..self.phys {
                for s in 0..self.phys {
                    let g = gate[(sp, s)];
                    if g == 0.0 {
                        continue;
                    }
                    let src = (l * self.phys + s) * self.right;
                    let dst = (l * self.phys + sp) * self.right;
                    for r in 0..self.right {
                        out.data[dst + r] += g * self.data[src + r];
                    }
                }
            }
        }
        out
    }

    /// Two-site tensor `Θ[(l s1), (s2 r)] = Σ_m A[l,s1,m] B[m,s2,r]`.
    pub(crate) fn merge(a: &Self, b: &Self) -> TwoSite {
        TwoSite { left: a.left, phys: a.phys, right: b.right, matrix: a.left_matrix() * b.right_matrix() }
    }
}

pub(crate) struct StandardTensor {
    phys: usize,
    right: usize,
    data: Vec<C64>,
}

impl StandardTensor {
    pub(crate) fn phys(&self) -> usize {
        self.phys
    }

    pub(crate) fn right(&self) -> usize {
        self.right
    }

    pub(crate) fn get(&self, l: usize, s: usize, r: usize) -> C64 {
        self.data[(l * self.phys + s) * self.right + r]
    }
}

pub(crate) struct TwoSite {
    left: usize,
    phys: usize,
    right: usize,
    matrix: Mat<f64>,
}

pub(crate) struct Split {
    pub left: SiteTensor,
    pub right: SiteTensor,
    pub discarded_weight: f64,
    pub saturated: bool,
}

impl TwoSite {
    /// Applies a gate on the pair superindex `s1 * phys + s2`.
    pub(crate) fn apply_two_site_gate(self, gate: &Mat<f64>) -> Self {
        let (lb, q, rb) = (self.left, self.phys, self.right);
        let x = Mat::from_fn(q * q, lb * rb, |row, col| {
            let (s1, s2) = (row / q, row % q);
            let (l, r) = (col / rb, col % rb);
            self.matrix[(l * q + s1, s2 * rb + r)]
        });
        let y = gate * &x;
        let matrix = Mat::from_fn(lb * q, q * rb, |row, col| {
            let (l, s1) = (row / q, row % q);
            let (s2, r) = (col / rb, col % rb);
            y[(s1 * q + s2, l * rb + r)]
        });
        Self { matrix, ..self }
    }

    /// SVD split keeping at most `max_bond` singular values with
    /// `s_k > cutoff · s_0`. Singular values go right when sweeping
    /// left-to-right, left otherwise.
    pub(crate) fn split(self, max_bond: usize, cutoff: f64, left_to_right: bool) -> Result<Split> {
        let svd = self.matrix.thin_svd().map_err(|e| Error::Numerical(format!("SVD failed: {e:?}")))?;
        let u = svd.U();
        let v = svd.V();
        let s: Vec<f64> = (0..svd.S().dim()).map(|i| svd.S()[i]).collect();
        let total: f64 = s.iter().map(|x| x * x).sum();
        let s0 = s.first().copied().unwrap_or(0.0);
        let above = s.iter().take_while(|&&x| x > cutoff * s0).count().max(1);
        let keep = above.min(max_bond).max(1);
        let discarded: f64 = s[keep..].iter().map(|x| x * x).sum();
        let discarded_weight = if total > 0.0 { (discarded / total).clamp(0.0, 1.0) } else { 0.0 };

        let (lb, q, rb) = (self.left, self.phys, self.right);
        let left_weight = |k: usize| if left_to_right { 1.0 } else { s[k] };
        let right_weight = |k: usize| if left_to_right { s[k] } else { 1.0 };
        let left_m = Mat::from_fn(lb * q, keep, |i, k| u[(i, k)] * left_weight(k));
        let right_m = Mat::from_fn(keep, q * rb, |k, j| v[(j, k)] * right_weight(k));
        Ok(Split {
            left: SiteTensor::from_left_matrix(&left_m, q),
            right: SiteTensor::from_right_matrix(&right_m, q),
            discarded_weight,
            saturated: above > max_bond,
        })
    }
}
