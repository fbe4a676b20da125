//! Matrix-product density operators evolved with second-order TEBD.
//!
//! Each site tensor has shape `(left bond, d², right bond)` and real entries;
//! the middle index labels the Hermitian operator basis of [`basis`], so the
//! state stays Hermitian under truncation. The chain
//! is kept in mixed-canonical form with respect to the Hilbert-Schmidt norm of
//! `vec(ρ)`: sites left of `center` are left-orthonormal, sites right of it are
//! right-orthonormal, so two-site SVD truncations are locally optimal.
//!
//! One Trotter step applies, in time order, even bonds for `dt/2`, odd bonds
//! for `dt/2`, every on-site factor for `dt`, odd bonds for `dt/2` and even
//! bonds for `dt/2`. Bond gates only carry hopping; detuning, interaction,
//! drive and all dissipators live in the exactly exponentiated on-site factor.

mod basis;
mod checkpoint;
mod relax;
mod tensor;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::dense::DenseState;
use crate::error::{Error, Result};
use crate::fock::{Boundary, LatticeSpec, LocalOperator};
use crate::linalg::{expm, kron, C64, I, ONE, ZERO};
use crate::model::{bond_hamiltonian, local_liouvillian, ModelParams};

pub use checkpoint::Checkpoint;
pub use relax::{relax_from, relax_to_steady, ConvergenceReport, InitialState, RelaxOptions, RelaxProgress};
pub use tensor::SiteTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct MpdoState {
    tensors: Vec<SiteTensor>,
    spec: LatticeSpec,
    max_bond: usize,
    cutoff: f64,
    center: usize,
}

/// Diagnostics of a single Trotter step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    /// `|tr ρ − 1|` before the end-of-step renormalization.
    pub trace_drift: f64,
    /// Largest discarded singular-value weight `Σ_discarded s² / Σ s²`.
    pub truncation_error: f64,
    /// A bond hit `max_bond` while singular values above the cutoff remained.
    pub bond_saturated: bool,
}

impl StepReport {
    fn merge(&mut self, other: &StepReport) {
        self.trace_drift = self.trace_drift.max(other.trace_drift);
        self.truncation_error = self.truncation_error.max(other.truncation_error);
        self.bond_saturated |= other.bond_saturated;
    }
}

fn check_open(spec: &LatticeSpec) -> Result<()> {
    if spec.boundary() == Boundary::Periodic && spec.n_sites() >= 3 {
        return Err(Error::InvalidLattice("MPDO evolution supports open chains only".into()));
    }
    Ok(())
}

impl MpdoState {
    /// Product state `⊗_j ρ_j`.
    pub fn product(spec: &LatticeSpec, locals: &[Mat<C64>], max_bond: usize, cutoff: f64) -> Result<Self> {
        check_open(spec)?;
        if max_bond == 0 {
            return Err(Error::InvalidParams("max_bond must be at least 1".into()));
        }
        if locals.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch { expected: spec.n_sites(), found: locals.len() });
        }
        let d = spec.local_dim();
        let mut tensors = Vec::with_capacity(locals.len());
        for rho in locals {
            if rho.nrows() != d || rho.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
            }
            let c = basis::coordinates(rho);
            if c.iter().any(|x| x.im.abs() > 1e-12 * rho.norm_max().max(1.0)) {
                return Err(Error::InvalidParams("local states must be Hermitian".into()));
            }
            let data = c.iter().map(|x| x.re).collect();
            tensors.push(SiteTensor::from_data(1, d * d, 1, data)?);
        }
        let mut state = Self { tensors, spec: spec.clone(), max_bond, cutoff, center: 0 };
        state.canonicalize();
        Ok(state)
    }

    pub fn fock_product(spec: &LatticeSpec, occupations: &[usize], max_bond: usize, cutoff: f64) -> Result<Self> {
        let d = spec.local_dim();
        if occupations.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch { expected: spec.n_sites(), found: occupations.len() });
        }
        let locals = occupations
            .iter()
            .map(|&n| {
                if n >= d {
                    Err(Error::InvalidLevel { level: n, dim: d })
                } else {
                    Ok(Mat::from_fn(d, d, |a, b| if a == n && b == n { ONE } else { ZERO }))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::product(spec, &locals, max_bond, cutoff)
    }

    /// `⊗_j |0><0|`.
    pub fn vacuum(spec: &LatticeSpec, max_bond: usize, cutoff: f64) -> Result<Self> {
        Self::fock_product(spec, &vec![0; spec.n_sites()], max_bond, cutoff)
    }

    /// `⊗_j |1><1|`, the ideal unit-filling state.
    pub fn mott(spec: &LatticeSpec, max_bond: usize, cutoff: f64) -> Result<Self> {
        Self::fock_product(spec, &vec![1; spec.n_sites()], max_bond, cutoff)
    }

    pub(crate) fn from_parts(
        tensors: Vec<SiteTensor>,
        spec: LatticeSpec,
        max_bond: usize,
        cutoff: f64,
        center: usize,
    ) -> Result<Self> {
        check_open(&spec)?;
        let q = spec.local_dim() * spec.local_dim();
        if tensors.len() != spec.n_sites() || center >= spec.n_sites() {
            return Err(Error::Checkpoint("site count or center inconsistent with lattice".into()));
        }
        for (j, t) in tensors.iter().enumerate() {
            let left_ok = if j == 0 { t.left() == 1 } else { t.left() == tensors[j - 1].right() };
            if t.phys() != q || !left_ok {
                return Err(Error::Checkpoint(format!("tensor {j} has inconsistent shape")));
            }
        }
        if tensors.last().map(|t| t.right()) != Some(1) {
            return Err(Error::Checkpoint("right boundary bond must be 1".into()));
        }
        Ok(Self { tensors, spec, max_bond, cutoff, center })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn tensors(&self) -> &[SiteTensor] {
        &self.tensors
    }

    /// Bond dimensions between neighbouring sites (`N − 1` entries).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.tensors.len() - 1].iter().map(|t| t.right()).collect()
    }

    fn contract_with(&self, vectors: &[&[C64]]) -> C64 {
        let mut env = vec![ONE];
        for (t, v) in self.tensors.iter().zip(vectors) {
            env = t.contract_left(&env, v);
        }
        env[0]
    }

    /// `Tr ρ`.
    pub fn trace(&self) -> C64 {
        let id = basis::trace_weights(&Mat::identity(self.spec.local_dim(), self.spec.local_dim()));
        let vs: Vec<&[C64]> = vec![&id; self.spec.n_sites()];
        self.contract_with(&vs)
    }

    fn check_op(&self, op: &LocalOperator, site: usize) -> Result<()> {
        self.spec.check_site(site)?;
        if op.dim() != self.spec.local_dim() {
            return Err(Error::DimensionMismatch { expected: self.spec.local_dim(), found: op.dim() });
        }
        Ok(())
    }

    /// `Tr(O_j ρ) / Tr ρ`.
    pub fn local_expectation(&self, op: &LocalOperator, site: usize) -> Result<C64> {
        self.check_op(op, site)?;
        let d = self.spec.local_dim();
        let id = basis::trace_weights(&Mat::identity(d, d));
        let v = basis::trace_weights(op.matrix());
        let vs: Vec<&[C64]> = (0..self.spec.n_sites()).map(|j| if j == site { &v[..] } else { &id[..] }).collect();
        Ok(self.contract_with(&vs) / self.trace())
    }

    /// `Tr(A_i B_j ρ) / Tr ρ`; for `i == j` the local product `A B` is used.
    pub fn two_point(&self, a: &LocalOperator, i: usize, b: &LocalOperator, j: usize) -> Result<C64> {
        self.check_op(a, i)?;
        self.check_op(b, j)?;
        if i == j {
            return self.local_expectation(&a.dot(b), i);
        }
        let d = self.spec.local_dim();
        let id = basis::trace_weights(&Mat::identity(d, d));
        let va = basis::trace_weights(a.matrix());
        let vb = basis::trace_weights(b.matrix());
        let vs: Vec<&[C64]> = (0..self.spec.n_sites())
            .map(|k| if k == i { &va[..] } else if k == j { &vb[..] } else { &id[..] })
            .collect();
        Ok(self.contract_with(&vs) / self.trace())
    }

    /// Full density matrix, for small chains only.
    pub fn to_dense(&self) -> Result<DenseState> {
        let d = self.spec.local_dim();
        let dim = self.spec.hilbert_dim();
        if dim > 729 {
            return Err(Error::TooLarge { dim, budget: 729 });
        }
        let n = self.spec.n_sites();
        let mut rho = Mat::<C64>::zeros(dim, dim);
        // enumerate all superindex strings (s_0 .. s_{N-1}) by left-to-right contraction
        let mut partial: Vec<(Vec<usize>, Vec<C64>)> = vec![(Vec::new(), vec![ONE])];
        for real in &self.tensors {
            let t = real.to_standard(d);
            let mut next = Vec::with_capacity(partial.len() * t.phys());
            for (idx, env) in &partial {
                for s in 0..t.phys() {
                    let mut e = vec![ZERO; t.right()];
                    for (l, &x) in env.iter().enumerate() {
                        if x == ZERO {
                            continue;
                        }
                        for (r, slot) in e.iter_mut().enumerate() {
                            *slot += x * t.get(l, s, r);
                        }
                    }
                    let mut idx = idx.clone();
                    idx.push(s);
                    next.push((idx, e));
                }
            }
            partial = next;
        }
        for (idx, env) in partial {
            let (mut row, mut col) = (0, 0);
            for &s in idx.iter().take(n) {
                row = row * d + s % d;
                col = col * d + s / d;
            }
            rho[(row, col)] += env[0];
        }
        DenseState::new(rho, self.spec.clone())
    }

    /// Brings the chain into left-canonical form with the center at site 0
    /// by a right-to-left LQ sweep.
    fn canonicalize(&mut self) {
        self.center = self.spec.n_sites() - 1;
        self.move_center(0);
    }

    fn move_center(&mut self, target: usize) {
        while self.center < target {
            let p = self.center;
            let (q, r) = self.tensors[p].left_qr();
            self.tensors[p] = q;
            self.tensors[p + 1] = self.tensors[p + 1].absorb_left(&r);
            self.center += 1;
        }
        while self.center > target {
            let p = self.center;
            let (l, q) = self.tensors[p].right_lq();
            self.tensors[p] = q;
            self.tensors[p - 1] = self.tensors[p - 1].absorb_right(&l);
            self.center -= 1;
        }
    }

    fn renormalize(&mut self) -> f64 {
        let tr = self.trace().re;
        self.tensors[self.center].scale(1.0 / tr);
        (tr - 1.0).abs()
    }

    /// Applies one layer of identical bond gates on bonds `(p, p+1)` with
    /// `p ≡ parity (mod 2)`, optionally preceded by an on-site gate on every
    /// site. The sweep direction alternates to keep the canonical center
    /// near where it is needed.
    fn apply_layer(&mut self, layer: &Layer<'_>, report: &mut StepReport) -> Result<()> {
        let n = self.spec.n_sites();
        let in_bond = |p: usize| p + 1 < n && p % 2 == layer.parity;
        let left_to_right = self.center < n / 2 || n == 1;
        if left_to_right {
            self.move_center(0);
            let mut p = 0;
            while p < n {
                if in_bond(p) {
                    self.apply_bond(p, layer, true, report)?;
                    p += 1; // center now at p (old p+1)
                } else if let Some(site_gate) = layer.pre_site {
                    self.tensors[p] = self.tensors[p].apply_site_gate(site_gate);
                }
                if p + 1 < n {
                    self.move_center(p + 1);
                }
                p += 1;
            }
        } else {
            self.move_center(n - 1);
            let mut p = n as isize - 1;
            while p >= 0 {
                let pu = p as usize;
                if pu >= 1 && in_bond(pu - 1) {
                    self.apply_bond(pu - 1, layer, false, report)?;
                    p -= 1;
                } else if let Some(site_gate) = layer.pre_site {
                    self.tensors[pu] = self.tensors[pu].apply_site_gate(site_gate);
                }
                if p >= 1 {
                    self.move_center(p as usize - 1);
                }
                p -= 1;
            }
        }
        Ok(())
    }

    fn apply_bond(&mut self, p: usize, layer: &Layer<'_>, left_to_right: bool, report: &mut StepReport) -> Result<()> {
        let gate = layer.bond_gate;
        let theta = SiteTensor::merge(&self.tensors[p], &self.tensors[p + 1]);
        let theta = theta.apply_two_site_gate(gate);
        let split = theta.split(self.max_bond, self.cutoff, left_to_right)?;
        report.truncation_error = report.truncation_error.max(split.discarded_weight);
        report.bond_saturated |= split.saturated;
        self.tensors[p] = split.left;
        self.tensors[p + 1] = split.right;
        self.center = if left_to_right { p + 1 } else { p };
        Ok(())
    }
}

/// `bond_gate` already includes any on-site factor on its two sites;
/// `pre_site` is applied alone to sites outside the layer's bonds.
struct Layer<'a> {
    parity: usize,
    bond_gate: &'a Mat<f64>,
    pre_site: Option<&'a Mat<f64>>,
}

/// Two-site generator of `ρ ↦ −i[H_bond, ρ]` on the pair superindex
/// `s_i * d² + s_j`.
pub fn bond_generator(d: usize, hopping: f64) -> Result<Mat<C64>> {
    let h = bond_hamiltonian(d, hopping)?;
    let q = d * d;
    let id = Mat::<C64>::identity(q, q);
    let left = two_site_sprepost(&(&h * faer::Scale(-I)), &id, d);
    let right = two_site_sprepost(&id, &(&h * faer::Scale(I)), d);
    Ok(&left + &right)
}

/// Superoperator of `ρ ↦ X ρ Y` for two-site operators `X`, `Y` (pair index
/// `a_i * d + a_j`), expressed on the MPDO pair superindex.
pub fn two_site_sprepost(x: &Mat<C64>, y: &Mat<C64>, d: usize) -> Mat<C64> {
    let q = d * d;
    let split = |s: usize| (s % d, s / d);
    Mat::from_fn(q * q, q * q, |row, col| {
        let (ai_, bi_) = split(row / q);
        let (aj_, bj_) = split(row % q);
        let (ai, bi) = split(col / q);
        let (aj, bj) = split(col % q);
        x[(ai_ * d + aj_, ai * d + aj)] * y[(bi * d + bj, bi_ * d + bj_)]
    })
}

/// Exponentiated Trotter factors for a fixed time step, in the Hermitian
/// operator basis.
#[derive(Clone, Debug)]
pub struct Propagators {
    dt: f64,
    site_full: Mat<f64>,
    bond_half: Mat<f64>,
    bond_full: Mat<f64>,
    /// `O(dt/2) · (S ⊗ S) · O(dt/2)`; the on-site factor commutes with every
    /// other bond of the odd layer, so the whole middle of the step is one
    /// two-site gate.
    odd_sandwich: Mat<f64>,
}

impl Propagators {
    pub fn new(spec: &LatticeSpec, params: &ModelParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("time step must be positive, got {dt}")));
        }
        params.validate(spec)?;
        let d = spec.local_dim();
        let site = local_liouvillian(d, params)?;
        let bond = bond_generator(d, params.hopping)?;
        let scaled = |m: &Mat<C64>, t: f64| m * faer::Scale(C64::new(t, 0.0));
        let site_full = expm(&scaled(&site, dt));
        let bond_half = expm(&scaled(&bond, dt / 2.0));
        let odd_sandwich = &bond_half * kron(&site_full, &site_full) * &bond_half;
        Ok(Self {
            dt,
            site_full: basis::site_superop(&site_full)?,
            bond_half: basis::pair_superop(&bond_half, d)?,
            bond_full: basis::pair_superop(&expm(&scaled(&bond, dt)), d)?,
            odd_sandwich: basis::pair_superop(&odd_sandwich, d)?,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

/// Advances `n_steps` full Trotter steps. Consecutive even half-steps are
/// merged, which is exact, so the result equals `n_steps` calls to
/// [`trotter_step_with`] up to rounding.
pub fn evolve_steps(state: &mut MpdoState, props: &Propagators, n_steps: usize) -> Result<StepReport> {
    let mut report = StepReport::default();
    if n_steps == 0 {
        return Ok(report);
    }
    let even_half = Layer { parity: 0, bond_gate: &props.bond_half, pre_site: None };
    let even_full = Layer { parity: 0, bond_gate: &props.bond_full, pre_site: None };
    let odd = Layer { parity: 1, bond_gate: &props.odd_sandwich, pre_site: Some(&props.site_full) };

    state.apply_layer(&even_half, &mut report)?;
    for step in 0..n_steps {
        let mut step_report = StepReport::default();
        state.apply_layer(&odd, &mut step_report)?;
        let closing = if step + 1 == n_steps { &even_half } else { &even_full };
        state.apply_layer(closing, &mut step_report)?;
        step_report.trace_drift = state.renormalize();
        report.merge(&step_report);
    }
    Ok(report)
}

pub fn trotter_step_with(state: &mut MpdoState, props: &Propagators) -> Result<StepReport> {
    evolve_steps(state, props, 1)
}

/// One second-order Trotter step of length `dt`.
pub fn trotter_step(state: &MpdoState, params: &ModelParams, dt: f64) -> Result<(MpdoState, StepReport)> {
    let props = Propagators::new(state.spec(), params, dt)?;
    let mut next = state.clone();
    let report = trotter_step_with(&mut next, &props)?;
    Ok((next, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{local_annihilation, local_number};

    fn spec(n: usize) -> LatticeSpec {
        LatticeSpec::open(n, 3).unwrap()
    }

    #[test]
    fn vacuum_basics() {
        let s = MpdoState::vacuum(&spec(5), 8, 1e-10).unwrap();
        assert_eq!(s.trace(), ONE);
        assert_eq!(s.bond_dims(), vec![1; 4]);
        let n = local_number(3).unwrap();
        for j in 0..5 {
            assert_eq!(s.local_expectation(&n, j).unwrap(), ZERO);
        }
    }

    #[test]
    fn mott_product_has_no_coherence() {
        let s = MpdoState::mott(&spec(4), 8, 1e-10).unwrap();
        let a = local_annihilation(3).unwrap();
        let ad = a.adjoint();
        assert_eq!(s.two_point(&ad, 0, &a, 2).unwrap(), ZERO);
        assert_eq!(s.local_expectation(&local_number(3).unwrap(), 3).unwrap(), ONE);
    }

    #[test]
    fn periodic_rings_are_rejected() {
        let ring = LatticeSpec::periodic(4, 3).unwrap();
        assert!(MpdoState::vacuum(&ring, 4, 0.0).is_err());
    }

    #[test]
    fn out_of_range_sites() {
        let s = MpdoState::vacuum(&spec(3), 4, 0.0).unwrap();
        let n = local_number(3).unwrap();
        assert!(matches!(s.local_expectation(&n, 3), Err(Error::SiteOutOfRange { .. })));
        assert!(s.two_point(&n, 0, &n, 7).is_err());
    }

    #[test]
    fn dark_vacuum_is_a_fixed_point() {
        let p = ModelParams::resonant(20.0, 0.0, 0.0, vec![0.1, 1.0]);
        let s = MpdoState::vacuum(&spec(4), 8, 1e-10).unwrap();
        let (next, report) = trotter_step(&s, &p, 0.01).unwrap();
        assert_eq!(next.bond_dims(), vec![1; 3]);
        let dense = next.to_dense().unwrap();
        assert!((dense.rho()[(0, 0)] - ONE).norm() < 1e-15);
        assert!(report.trace_drift < 1e-15);
    }

    #[test]
    fn bond_gate_is_unitary_on_superspace() {
        let g = bond_generator(3, 0.8).unwrap();
        let u = expm(&(&g * faer::Scale(C64::new(0.3, 0.0))));
        let prod = u.adjoint() * &u;
        assert!(crate::linalg::max_abs_diff(&prod, &Mat::identity(81, 81)) < 1e-12);
    }
}
