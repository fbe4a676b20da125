//! Rotating-frame Bose-Hubbard Hamiltonian with a parametric two-photon drive,
//! and the Lindblad generator for level-dependent (cascaded) decay.
//!
//! Vectorization is column-stacking throughout the crate: `vec(ρ)[a + D*b] =
//! ρ[a, b]`, hence `vec(X ρ Y) = (Yᵀ ⊗ X) vec(ρ)`.

use std::f64::consts::SQRT_2;

use faer::Mat;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    embed, local_annihilation, local_jump, local_number, LatticeOperator, LatticeSpec, LocalOperator,
};
use crate::linalg::{kron, SparseMatrix, C64, I, ONE, ZERO};

/// Ratio |Ω|/|U| above which the few-level truncation is flagged.
pub const TRUNCATION_RATIO_WARN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Δ = ω − ω_L/2.
    pub delta: f64,
    /// On-site Kerr interaction U.
    pub interaction: f64,
    /// Nearest-neighbour hopping J.
    pub hopping: f64,
    /// Parametric drive amplitude Ω.
    pub drive: C64,
    /// `gammas[m]` is the decay rate of `|m+1> -> |m>`.
    pub gammas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelWarning {
    /// `gammas[upper] < gammas[lower]` although `upper > lower`.
    CascadeViolation { lower: usize, upper: usize },
    /// |Ω|/|U| is not small, so levels above the cutoff may be populated.
    WeakNonlinearity { ratio: f64 },
}

/// Detuning that puts the drive on the two-photon resonance `ω_L = 2ω + U`.
pub fn resonant_detuning(interaction: f64) -> f64 {
    -interaction / 2.0
}

impl ModelParams {
    /// Parameters on the two-photon resonance, `Δ = −U/2`.
    pub fn resonant(interaction: f64, hopping: f64, drive: f64, gammas: Vec<f64>) -> Self {
        Self {
            delta: resonant_detuning(interaction),
            interaction,
            hopping,
            drive: C64::new(drive, 0.0),
            gammas,
        }
    }

    pub fn with_drive(mut self, drive: C64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_hopping(mut self, hopping: f64) -> Self {
        self.hopping = hopping;
        self
    }

    pub fn validate(&self, spec: &LatticeSpec) -> Result<()> {
        let expected = spec.local_dim() - 1;
        if self.gammas.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: self.gammas.len() });
        }
        let finite = [self.delta, self.interaction, self.hopping, self.drive.re, self.drive.im]
            .iter()
            .chain(self.gammas.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.hopping < 0.0 {
            return Err(Error::InvalidParams(format!("hopping must be nonnegative, got {}", self.hopping)));
        }
        if let Some(g) = self.gammas.iter().find(|g| **g < 0.0) {
            return Err(Error::InvalidParams(format!("decay rates must be nonnegative, got {g}")));
        }
        Ok(())
    }

    /// Physical-regime checks that do not make the model ill-defined.
    pub fn warnings(&self) -> Vec<ModelWarning> {
        let mut out = Vec::new();
        for upper in 1..self.gammas.len() {
            for lower in 0..upper {
                if self.gammas[upper] < self.gammas[lower] {
                    out.push(ModelWarning::CascadeViolation { lower, upper });
                }
            }
        }
        if self.drive.norm() > 0.0 {
            let ratio = if self.interaction == 0.0 {
                f64::INFINITY
            } else {
                self.drive.norm() / self.interaction.abs()
            };
            if ratio > TRUNCATION_RATIO_WARN {
                out.push(ModelWarning::WeakNonlinearity { ratio });
            }
        }
        out
    }

    fn check(&self, spec: &LatticeSpec) -> Result<()> {
        self.validate(spec)?;
        for w in self.warnings() {
            match w {
                ModelWarning::CascadeViolation { lower, upper } => {
                    warn!("decay cascade violated: gamma[{upper}] < gamma[{lower}]")
                }
                ModelWarning::WeakNonlinearity { ratio } => {
                    log::debug!("|drive|/|U| = {ratio:.3}; truncation to {} levels may be inaccurate", spec.local_dim())
                }
            }
        }
        Ok(())
    }
}

/// `a†a†aa = diag(n(n−1))`, assembled exactly.
fn kerr_operator(d: usize) -> Result<LocalOperator> {
    LocalOperator::from_fn(d, |i, j| if i == j { C64::new((i * i.saturating_sub(1)) as f64, 0.0) } else { ZERO })
}

/// Single-site part of the Hamiltonian: `Δ n + (U/2) a†a†aa + (Ω/√2) a†a† + (Ω*/√2) aa`.
pub fn local_hamiltonian(d: usize, params: &ModelParams) -> Result<LocalOperator> {
    let a = local_annihilation(d)?;
    let ad = a.adjoint();
    let n = local_number(d)?;
    let pair_create = ad.dot(&ad);
    let pair_destroy = a.dot(&a);
    let kerr = kerr_operator(d)?;
    Ok(n
        .scale(C64::new(params.delta, 0.0))
        .plus(&kerr.scale(C64::new(params.interaction / 2.0, 0.0)))
        .plus(&pair_create.scale(params.drive / SQRT_2))
        .plus(&pair_destroy.scale(params.drive.conj() / SQRT_2)))
}

/// Two-site hopping operator `−J (a ⊗ a† + a† ⊗ a)` on `C^d ⊗ C^d`.
pub fn bond_hamiltonian(d: usize, hopping: f64) -> Result<Mat<C64>> {
    let a = local_annihilation(d)?;
    let ad = a.adjoint();
    let sum = &kron(a.matrix(), ad.matrix()) + &kron(ad.matrix(), a.matrix());
    Ok(&sum * faer::Scale(C64::new(-hopping, 0.0)))
}

fn on_site_sum(spec: &LatticeSpec, op: &LocalOperator) -> Result<LatticeOperator> {
    let mut total = LatticeOperator::zeros(spec);
    for j in 0..spec.n_sites() {
        total = total.plus(&embed(op, j, spec)?);
    }
    Ok(total)
}

fn hopping_operator(spec: &LatticeSpec, hopping: f64) -> Result<LatticeOperator> {
    let d = spec.local_dim();
    let a = local_annihilation(d)?;
    let ad = a.adjoint();
    let mut total = LatticeOperator::zeros(spec);
    for (i, j) in spec.bonds() {
        let ai = embed(&a, i, spec)?;
        let adi = embed(&ad, i, spec)?;
        let aj = embed(&a, j, spec)?;
        let adj = embed(&ad, j, spec)?;
        total = total.plus(&ai.dot(&adj)).plus(&adi.dot(&aj));
    }
    Ok(total.scale(C64::new(-hopping, 0.0)))
}

pub fn build_hamiltonian(spec: &LatticeSpec, params: &ModelParams) -> Result<LatticeOperator> {
    params.check(spec)?;
    let local = local_hamiltonian(spec.local_dim(), params)?;
    Ok(on_site_sum(spec, &local)?.plus(&hopping_operator(spec, params.hopping)?))
}

/// Superoperator of `ρ ↦ X ρ Y`.
pub fn sprepost(x: &SparseMatrix, y: &SparseMatrix) -> SparseMatrix {
    SparseMatrix::kron(&y.transpose(), x)
}

/// Dense superoperator of `ρ ↦ X ρ Y`.
pub fn dense_sprepost(x: &Mat<C64>, y: &Mat<C64>) -> Mat<C64> {
    kron(&y.transpose().to_owned(), x)
}

/// Superoperator of `ρ ↦ −i[H, ρ]`.
pub fn commutator_superop(h: &SparseMatrix) -> SparseMatrix {
    let id = SparseMatrix::identity(h.nrows());
    (&sprepost(h, &id) - &sprepost(&id, h)).scale(-I)
}

/// `(γ/2)(2 κ ρ κ† − {κ†κ, ρ})` as a superoperator.
pub fn dissipator_superop(jump: &SparseMatrix, rate: f64) -> SparseMatrix {
    let id = SparseMatrix::identity(jump.nrows());
    let jd = jump.adjoint();
    let jdj = &jd * jump;
    let sandwich = sprepost(jump, &jd).scale(C64::new(2.0, 0.0));
    let anti = &sprepost(&jdj, &id) + &sprepost(&id, &jdj);
    (&sandwich - &anti).scale(C64::new(rate / 2.0, 0.0))
}

/// Dense local Lindblad generator for one site (on-site Hamiltonian plus all
/// cascade dissipators), acting on the column-stacked `d²` superindex.
pub fn local_liouvillian(d: usize, params: &ModelParams) -> Result<Mat<C64>> {
    let h = local_hamiltonian(d, params)?.to_sparse();
    let mut total = commutator_superop(&h);
    for (m, &rate) in params.gammas.iter().enumerate() {
        if rate != 0.0 {
            total = &total + &dissipator_superop(&local_jump(m, d)?.to_sparse(), rate);
        }
    }
    Ok(total.to_dense())
}

/// Lindblad generator on column-stacked `vec(ρ)`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    matrix: SparseMatrix,
    spec: LatticeSpec,
    params: ModelParams,
}

impl Liouvillian {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Hilbert-space dimension `D` (the superoperator is `D² × D²`).
    pub fn hilbert_dim(&self) -> usize {
        self.spec.hilbert_dim()
    }

    pub fn apply(&self, rho_vec: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(rho_vec)
    }

    /// Largest entry of `vec(I)ᵀ L`; zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let dim = self.hilbert_dim();
        let mut row = vec![ZERO; self.matrix.ncols()];
        for a in 0..dim {
            for (c, v) in self.matrix.row(a + dim * a) {
                row[c] += v;
            }
        }
        row.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn build_liouvillian(spec: &LatticeSpec, params: &ModelParams) -> Result<Liouvillian> {
    let h = build_hamiltonian(spec, params)?;
    let mut total = commutator_superop(h.matrix());
    for (m, &rate) in params.gammas.iter().enumerate() {
        if rate == 0.0 {
            continue;
        }
        let jump = local_jump(m, spec.local_dim())?;
        for j in 0..spec.n_sites() {
            total = &total + &dissipator_superop(embed(&jump, j, spec)?.matrix(), rate);
        }
    }
    Ok(Liouvillian { matrix: total, spec: spec.clone(), params: params.clone() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiouvillianTerm {
    Detuning,
    Interaction,
    Hopping,
    Drive,
    Decay(usize),
}

/// The generator split into one piece per physical parameter. Their sum equals
/// [`build_liouvillian`]; each piece is linear in its own parameter.
pub fn build_liouvillian_parts(
    spec: &LatticeSpec,
    params: &ModelParams,
) -> Result<Vec<(LiouvillianTerm, SparseMatrix)>> {
    params.validate(spec)?;
    let d = spec.local_dim();
    let a = local_annihilation(d)?;
    let ad = a.adjoint();
    let number = local_number(d)?;
    let kerr = kerr_operator(d)?;
    let drive = ad
        .dot(&ad)
        .scale(params.drive / SQRT_2)
        .plus(&a.dot(&a).scale(params.drive.conj() / SQRT_2));

    let mut parts = vec![
        (
            LiouvillianTerm::Detuning,
            commutator_superop(on_site_sum(spec, &number.scale(C64::new(params.delta, 0.0)))?.matrix()),
        ),
        (
            LiouvillianTerm::Interaction,
            commutator_superop(
                on_site_sum(spec, &kerr.scale(C64::new(params.interaction / 2.0, 0.0)))?.matrix(),
            ),
        ),
        (LiouvillianTerm::Hopping, commutator_superop(hopping_operator(spec, params.hopping)?.matrix())),
        (LiouvillianTerm::Drive, commutator_superop(on_site_sum(spec, &drive)?.matrix())),
    ];
    for (m, &rate) in params.gammas.iter().enumerate() {
        let jump = local_jump(m, d)?;
        let dim = spec.hilbert_dim();
        let mut part = SparseMatrix::zeros(dim * dim, dim * dim);
        for j in 0..spec.n_sites() {
            part = &part + &dissipator_superop(embed(&jump, j, spec)?.matrix(), rate);
        }
        parts.push((LiouvillianTerm::Decay(m), part));
    }
    Ok(parts)
}

/// `vec(I)` for a `dim`-dimensional Hilbert space.
pub fn vectorized_identity(dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim * dim];
    for a in 0..dim {
        v[a + dim * a] = ONE;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Boundary;

    fn spec(n: usize, d: usize) -> LatticeSpec {
        LatticeSpec::new(n, Boundary::Open, d).unwrap()
    }

    #[test]
    fn resonant_detuning_values() {
        assert_eq!(resonant_detuning(100.0), -50.0);
        assert_eq!(resonant_detuning(20.0), -10.0);
        assert_eq!(resonant_detuning(0.0), 0.0);
    }

    #[test]
    fn single_site_hamiltonian_entries() {
        let p = ModelParams::resonant(100.0, 0.0, 0.0, vec![0.1, 1.0]);
        let h = build_hamiltonian(&spec(1, 3), &p).unwrap().to_dense(16).unwrap();
        let diag: Vec<f64> = (0..3).map(|i| h[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, -50.0, 0.0]);

        let p = p.with_drive(C64::new(3.5, 0.0));
        let h = build_hamiltonian(&spec(1, 3), &p).unwrap().to_dense(16).unwrap();
        assert!((h[(2, 0)] - C64::new(3.5, 0.0)).norm() < 1e-14);
        assert!((h[(0, 2)] - C64::new(3.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn two_site_hopping_spectrum() {
        let p = ModelParams { delta: 0.0, interaction: 0.0, hopping: 1.0, drive: ZERO, gammas: vec![0.0] };
        let h = build_hamiltonian(&spec(2, 2), &p).unwrap().to_dense(16).unwrap();
        // single-excitation sector: |01> = index 1, |10> = index 2
        assert_eq!(h[(1, 2)], C64::new(-1.0, 0.0));
        assert_eq!(h[(2, 1)], C64::new(-1.0, 0.0));
        let sector = Mat::from_fn(2, 2, |i, j| h[(i + 1, j + 1)]);
        let mut ev = sector.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        ev.sort_by(f64::total_cmp);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn validation_errors_and_warnings() {
        let s = spec(2, 3);
        let p = ModelParams::resonant(20.0, 0.5, 5.0, vec![0.1]);
        assert!(matches!(p.validate(&s), Err(Error::DimensionMismatch { .. })));
        let p = ModelParams::resonant(20.0, -0.5, 5.0, vec![0.1, 1.0]);
        assert!(p.validate(&s).is_err());
        let p = ModelParams::resonant(20.0, 0.5, 5.0, vec![1.0, 0.1]);
        assert!(p.validate(&s).is_ok());
        assert!(p.warnings().contains(&ModelWarning::CascadeViolation { lower: 0, upper: 1 }));
        let p = ModelParams::resonant(100.0, 0.5, 5.0, vec![0.1, 1.0]);
        assert!(p.warnings().is_empty());
    }

    #[test]
    fn vacuum_is_dark_without_drive() {
        let s = spec(2, 3);
        let p = ModelParams::resonant(20.0, 0.7, 0.0, vec![0.1, 1.0]);
        let l = build_liouvillian(&s, &p).unwrap();
        let dim = s.hilbert_dim();
        let mut vac = vec![ZERO; dim * dim];
        vac[0] = ONE;
        assert!(l.apply(&vac).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn parts_sum_to_whole() {
        let s = LatticeSpec::periodic(3, 3).unwrap();
        let p = ModelParams {
            delta: -3.0,
            interaction: 7.0,
            hopping: 0.4,
            drive: C64::new(1.5, -0.5),
            gammas: vec![0.2, 1.3],
        };
        let whole = build_liouvillian(&s, &p).unwrap();
        let parts = build_liouvillian_parts(&s, &p).unwrap();
        let dim = s.hilbert_dim();
        let sum = parts.iter().fold(SparseMatrix::zeros(dim * dim, dim * dim), |acc, (_, m)| &acc + m);
        assert!(sum.max_abs_diff(whole.matrix()) < 1e-12);
    }
}
