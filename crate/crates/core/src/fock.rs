//! Truncated Fock-space operators and their embedding into the lattice.
//!
//! Basis ordering for the lattice Hilbert space: site 0 is the leftmost,
//! slowest-varying tensor factor. A product state `|n_0 n_1 ... n_{N-1}>` has
//! index `sum_j n_j * d^(N-1-j)`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SparseMatrix, C64, ONE, ZERO};

/// Dense-conversion guard for lattice operators.
pub const DENSE_DIM_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLatticeSpec")]
pub struct LatticeSpec {
    n_sites: usize,
    boundary: Boundary,
    local_dim: usize,
}

#[derive(Deserialize)]
struct RawLatticeSpec {
    n_sites: usize,
    boundary: Boundary,
    local_dim: usize,
}

impl TryFrom<RawLatticeSpec> for LatticeSpec {
    type Error = Error;

    fn try_from(raw: RawLatticeSpec) -> Result<Self> {
        LatticeSpec::new(raw.n_sites, raw.boundary, raw.local_dim)
    }
}

impl LatticeSpec {
    pub fn new(n_sites: usize, boundary: Boundary, local_dim: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidLattice("need at least one site".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidDimension(local_dim));
        }
        Ok(Self { n_sites, boundary, local_dim })
    }

    pub fn open(n_sites: usize, local_dim: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Open, local_dim)
    }

    pub fn periodic(n_sites: usize, local_dim: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Periodic, local_dim)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// `d^N`, saturating at `usize::MAX`.
    pub fn hilbert_dim(&self) -> usize {
        (0..self.n_sites).fold(1usize, |acc, _| acc.saturating_mul(self.local_dim))
    }

    /// Nearest-neighbour bonds `(j, j+1)`. A periodic ring adds `(N-1, 0)`
    /// only for `N >= 3`; smaller rings would duplicate an existing bond.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut bonds: Vec<_> = (0..self.n_sites.saturating_sub(1)).map(|j| (j, j + 1)).collect();
        if self.boundary == Boundary::Periodic && self.n_sites >= 3 {
            bonds.push((self.n_sites - 1, 0));
        }
        bonds
    }

    /// Anchor site for correlation rows: `N / 2` rounded down.
    pub fn middle_site(&self) -> usize {
        self.n_sites / 2
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site, n_sites: self.n_sites })
        }
    }
}

/// Operator on a single truncated oscillator, `|0>..|d-1>`.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    matrix: Mat<C64>,
}

impl LocalOperator {
    pub fn from_matrix(matrix: Mat<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        if matrix.nrows() < 2 {
            return Err(Error::InvalidDimension(matrix.nrows()));
        }
        Ok(Self { matrix })
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::from_matrix(Mat::from_fn(d, d, f))
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::from_matrix(Mat::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint().to_owned() }
    }

    pub fn dot(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix * &rhs.matrix }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { matrix: &self.matrix * faer::Scale(s) }
    }

    pub fn plus(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix + &rhs.matrix }
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense(&self.matrix)
    }
}

/// Bosonic annihilation operator `a` truncated to `d` levels.
pub fn local_annihilation(d: usize) -> Result<LocalOperator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    LocalOperator::from_fn(d, |i, j| if j == i + 1 { C64::new((j as f64).sqrt(), 0.0) } else { ZERO })
}

pub fn local_creation(d: usize) -> Result<LocalOperator> {
    Ok(local_annihilation(d)?.adjoint())
}

pub fn local_number(d: usize) -> Result<LocalOperator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    LocalOperator::from_fn(d, |i, j| if i == j { C64::new(i as f64, 0.0) } else { ZERO })
}

/// Projector `|n><n|`.
pub fn local_projector(n: usize, d: usize) -> Result<LocalOperator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if n >= d {
        return Err(Error::InvalidLevel { level: n, dim: d });
    }
    LocalOperator::from_fn(d, |i, j| if i == n && j == n { ONE } else { ZERO })
}

/// Cascade jump operator `|m><m+1|`.
pub fn local_jump(m: usize, d: usize) -> Result<LocalOperator> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    if m + 1 >= d {
        return Err(Error::InvalidLevel { level: m, dim: d });
    }
    LocalOperator::from_fn(d, |i, j| if i == m && j == m + 1 { ONE } else { ZERO })
}

/// Sparse operator on the full lattice Hilbert space.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    matrix: SparseMatrix,
    spec: LatticeSpec,
}

impl LatticeOperator {
    pub fn new(matrix: SparseMatrix, spec: LatticeSpec) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: matrix.nrows() });
        }
        Ok(Self { matrix, spec })
    }

    pub fn zeros(spec: &LatticeSpec) -> Self {
        let dim = spec.hilbert_dim();
        Self { matrix: SparseMatrix::zeros(dim, dim), spec: spec.clone() }
    }

    pub fn identity(spec: &LatticeSpec) -> Self {
        Self { matrix: SparseMatrix::identity(spec.hilbert_dim()), spec: spec.clone() }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SparseMatrix {
        self.matrix
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Dense copy, refused above `limit` rows.
    pub fn to_dense(&self, limit: usize) -> Result<Mat<C64>> {
        if self.dim() > limit {
            return Err(Error::TooLarge { dim: self.dim(), budget: limit });
        }
        Ok(self.matrix.to_dense())
    }

    pub fn dot(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix * &rhs.matrix, spec: self.spec.clone() }
    }

    pub fn plus(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix + &rhs.matrix, spec: self.spec.clone() }
    }

    pub fn minus(&self, rhs: &Self) -> Self {
        Self { matrix: &self.matrix - &rhs.matrix, spec: self.spec.clone() }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { matrix: self.matrix.scale(s), spec: self.spec.clone() }
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: self.matrix.adjoint(), spec: self.spec.clone() }
    }
}

/// `I ⊗ ... ⊗ op ⊗ ... ⊗ I` with `op` at `site`.
pub fn embed(op: &LocalOperator, site: usize, spec: &LatticeSpec) -> Result<LatticeOperator> {
    spec.check_site(site)?;
    let d = spec.local_dim();
    if op.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.dim() });
    }
    let left = d.pow(site as u32);
    let right = d.pow((spec.n_sites() - 1 - site) as u32);
    let local = op.to_sparse();

    let mut triplets = Vec::with_capacity(local.nnz() * left * right);
    for l in 0..left {
        for (a, b, v) in local.iter() {
            let row0 = (l * d + a) * right;
            let col0 = (l * d + b) * right;
            for r in 0..right {
                triplets.push((row0 + r, col0 + r, v));
            }
        }
    }
    let dim = spec.hilbert_dim();
    LatticeOperator::new(SparseMatrix::from_triplets(dim, dim, triplets), spec.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn annihilation_d2_and_d3() {
        let a2 = local_annihilation(2).unwrap();
        assert_eq!(a2.entry(0, 1), ONE);
        assert_eq!(a2.entry(1, 0), ZERO);
        assert_eq!(a2.entry(0, 0), ZERO);

        let a3 = local_annihilation(3).unwrap();
        assert_eq!(a3.entry(0, 1), ONE);
        assert_eq!(a3.entry(1, 2), C64::new(2f64.sqrt(), 0.0));
        let nnz = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| a3.entry(i, j) != ZERO).count();
        assert_eq!(nnz, 2);
    }

    #[test]
    fn number_operator_from_ladder() {
        let a = local_annihilation(3).unwrap();
        let n = a.adjoint().dot(&a);
        assert!(max_abs_diff(n.matrix(), local_number(3).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn rejects_small_dims() {
        assert!(matches!(local_annihilation(1), Err(Error::InvalidDimension(1))));
        assert!(matches!(local_jump(2, 3), Err(Error::InvalidLevel { level: 2, dim: 3 })));
        assert!(LatticeSpec::open(0, 3).is_err());
        assert!(LatticeSpec::open(3, 1).is_err());
    }

    #[test]
    fn jump_operators() {
        let k0 = local_jump(0, 3).unwrap();
        let k1 = local_jump(1, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k0.entry(i, j), if (i, j) == (0, 1) { ONE } else { ZERO });
                assert_eq!(k1.entry(i, j), if (i, j) == (1, 2) { ONE } else { ZERO });
            }
        }
        let proj = k1.adjoint().dot(&k1);
        assert!(max_abs_diff(proj.matrix(), local_projector(2, 3).unwrap().matrix()) < 1e-15);
    }

    #[test]
    fn short_rings_have_no_duplicate_bonds() {
        assert_eq!(LatticeSpec::periodic(1, 2).unwrap().bonds(), vec![]);
        assert_eq!(LatticeSpec::periodic(2, 2).unwrap().bonds(), vec![(0, 1)]);
        assert_eq!(LatticeSpec::periodic(3, 2).unwrap().bonds(), vec![(0, 1), (1, 2), (2, 0)]);
        assert_eq!(LatticeSpec::open(3, 2).unwrap().bonds(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn embed_identity_is_identity() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        for site in 0..3 {
            let e = embed(&LocalOperator::identity(3).unwrap(), site, &spec).unwrap();
            assert_eq!(e.matrix(), LatticeOperator::identity(&spec).matrix());
        }
    }

    #[test]
    fn embed_site_zero_is_slowest() {
        // |1>⊗|0> has index 1*2 + 0 = 2; a_0 maps it to |0>⊗|0>, index 0.
        let spec = LatticeSpec::open(2, 2).unwrap();
        let a0 = embed(&local_annihilation(2).unwrap(), 0, &spec).unwrap();
        let mut psi = vec![ZERO; 4];
        psi[2] = ONE;
        let out = a0.matrix().mul_vec(&psi);
        assert_eq!(out, vec![ONE, ZERO, ZERO, ZERO]);
    }

    #[test]
    fn embed_checks_inputs() {
        let spec = LatticeSpec::open(2, 3).unwrap();
        assert!(matches!(
            embed(&local_annihilation(3).unwrap(), 2, &spec),
            Err(Error::SiteOutOfRange { .. })
        ));
        assert!(matches!(
            embed(&local_annihilation(2).unwrap(), 0, &spec),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_conversion_is_gated() {
        let spec = LatticeSpec::open(13, 2).unwrap();
        let id = LatticeOperator::identity(&spec);
        assert!(matches!(id.to_dense(DENSE_DIM_LIMIT), Err(Error::TooLarge { .. })));
    }
}
