use std::f64::consts::PI;

use cavity_core::fock::{embed, local_annihilation, LatticeOperator, LatticeSpec};
use cavity_core::linalg::C64;
use cavity_core::model::{build_hamiltonian, ModelParams};
use cavity_core::momentum::{build_momentum_hamiltonian, mode_detuning, quartic_index_set, resonant_modes};
use faer::Mat;
use proptest::prelude::*;

fn brute_force_index_set(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                for m in 0..n {
                    if (l + m + 2 * n - j - k) % n == 0 {
                        out.push([j, k, l, m]);
                    }
                }
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn index_set_matches_brute_force(n in 1usize..=6) {
        let mut got = quartic_index_set(n);
        got.sort();
        prop_assert_eq!(got.len(), n * n * n);
        prop_assert_eq!(got, brute_force_index_set(n));
    }

    #[test]
    fn spectrum_is_symmetric(n in 1usize..64, delta in -20.0f64..20.0, hopping in -3.0f64..3.0) {
        let s = resonant_modes(n, delta, hopping, 0.0).unwrap();
        prop_assert_eq!(s.detunings.len(), n);
        for k in 0..n {
            prop_assert_eq!(s.detunings[k], s.detunings[(n - k) % n]);
        }
    }

    #[test]
    fn quarter_modes_resonate_at_zero_detuning(quarter in 1usize..16, hopping in 0.1f64..3.0) {
        let n = 4 * quarter;
        let s = resonant_modes(n, 0.0, hopping, 0.0).unwrap();
        prop_assert_eq!(s.resonant, vec![quarter, 3 * quarter]);
    }
}

#[test]
fn detuning_landmarks() {
    for n in [3, 4, 7, 10] {
        assert_eq!(mode_detuning(0, n, -1.5, 0.8).unwrap(), -1.5 - 1.6);
        if n % 2 == 0 {
            assert_eq!(mode_detuning(n / 2, n, -1.5, 0.8).unwrap(), -1.5 + 1.6);
        }
    }
    assert_eq!(mode_detuning(1, 4, 0.0, 1.0).unwrap(), 0.0);
    assert!(resonant_modes(8, -10.0, 1.0, 1e-12).unwrap().resonant.is_empty());
    assert_eq!(resonant_modes(6, 0.0, 0.0, 0.0).unwrap().resonant, (0..6).collect::<Vec<_>>());
}

fn modes(spec: &LatticeSpec) -> Vec<LatticeOperator> {
    let a = local_annihilation(spec.local_dim()).unwrap();
    (0..spec.n_sites()).map(|k| embed(&a, k, spec).unwrap()).collect()
}

#[test]
fn decoupled_harmonic_modes_have_flat_detuning() {
    let spec = LatticeSpec::periodic(3, 3).unwrap();
    let params = ModelParams { delta: 0.7, interaction: 0.0, hopping: 0.0, drive: C64::new(1.3, 0.4), gammas: vec![0.1, 1.0] };
    let h = build_momentum_hamiltonian(&spec, &params).unwrap();
    let b = modes(&spec);
    let pair = params.drive / 2f64.sqrt();
    let mut expected = LatticeOperator::zeros(&spec);
    for k in 0..3 {
        let bd = b[k].adjoint();
        let create = bd.dot(&b[(3 - k) % 3].adjoint());
        expected = expected
            .plus(&create.scale(pair))
            .plus(&create.adjoint().scale(pair.conj()))
            .plus(&bd.dot(&b[k]).scale(C64::new(0.7, 0.0)));
    }
    assert!(h.matrix().max_abs_diff(expected.matrix()) < 1e-14);
}

/// Occupation strings of `n` modes below `cap` in total, in basis order.
fn low_sector(n: usize, d: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for idx in 0..d.pow(n as u32) {
        let mut occ = vec![0; n];
        let mut rest = idx;
        for slot in occ.iter_mut().rev() {
            *slot = rest % d;
            rest /= d;
        }
        if occ.iter().sum::<usize>() <= cap {
            out.push(occ);
        }
    }
    out
}

fn basis_index(occ: &[usize], d: usize) -> usize {
    occ.iter().fold(0, |acc, &x| acc * d + x)
}

/// Columns: images of the real-space Fock states of `sector` in the mode
/// Fock space, built from `a_n† = N^{-1/2} Σ_k exp(−2πi nk/N) b_k†`.
fn fourier_map(spec: &LatticeSpec, sector: &[Vec<usize>]) -> Mat<C64> {
    let n = spec.n_sites();
    let b = modes(spec);
    let mut ad = Vec::new();
    for site in 0..n {
        let mut op = LatticeOperator::zeros(spec);
        for (k, bk) in b.iter().enumerate() {
            let phase = C64::from_polar(1.0 / (n as f64).sqrt(), -2.0 * PI * (site * k) as f64 / n as f64);
            op = op.plus(&bk.adjoint().scale(phase));
        }
        ad.push(op);
    }
    let dim = spec.hilbert_dim();
    let mut u = Mat::<C64>::zeros(dim, sector.len());
    for (col, occ) in sector.iter().enumerate() {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[0] = C64::new(1.0, 0.0);
        for (site, &count) in occ.iter().enumerate() {
            for q in 0..count {
                v = ad[site].matrix().mul_vec(&v);
                let norm = ((q + 1) as f64).sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
            }
        }
        for (row, x) in v.into_iter().enumerate() {
            u[(row, col)] = x;
        }
    }
    u
}

fn equivalence_gap(spec: &LatticeSpec, params: &ModelParams, cap: usize) -> f64 {
    let d = spec.local_dim();
    let sector = low_sector(spec.n_sites(), d, cap);
    let u = fourier_map(spec, &sector);
    let gram = u.adjoint() * &u;
    assert!((&gram - Mat::<C64>::identity(sector.len(), sector.len())).norm_max() < 1e-12);

    let real = build_hamiltonian(spec, params).unwrap().to_dense(1 << 12).unwrap();
    let mode = build_momentum_hamiltonian(spec, params).unwrap().to_dense(1 << 12).unwrap();
    let conjugated = u.adjoint() * &mode * &u;
    let rows: Vec<usize> = sector.iter().map(|occ| basis_index(occ, d)).collect();
    let restricted = Mat::from_fn(sector.len(), sector.len(), |r, c| real[(rows[r], rows[c])]);
    (&conjugated - &restricted).norm_max()
}

#[test]
fn mode_hamiltonian_is_the_fourier_transform_of_the_ring() {
    let spec = LatticeSpec::periodic(3, 8).unwrap();
    let params = ModelParams { delta: -2.0, interaction: 4.0, hopping: 0.9, drive: C64::new(1.1, 0.3), gammas: vec![1.0; 7] };
    let gap = equivalence_gap(&spec, &params, 5);
    assert!(gap <= 1e-6, "gap {gap:e}");
}

#[test]
fn two_mode_transform_without_hopping() {
    let spec = LatticeSpec::periodic(2, 8).unwrap();
    let params = ModelParams { delta: 0.5, interaction: 3.0, hopping: 0.0, drive: C64::new(0.8, 0.0), gammas: vec![1.0; 7] };
    let gap = equivalence_gap(&spec, &params, 5);
    assert!(gap <= 1e-6, "gap {gap:e}");
}

#[test]
fn doubled_interaction_prefactor_is_inconsistent() {
    let spec = LatticeSpec::periodic(3, 8).unwrap();
    let mut params = ModelParams { delta: 0.0, interaction: 4.0, hopping: 0.0, drive: C64::new(0.0, 0.0), gammas: vec![1.0; 7] };
    assert!(equivalence_gap(&spec, &params, 4) <= 1e-9);
    // With U/N instead of U/(2N) the quartic part would be doubled; the
    // real-space Kerr term at 2U is the matching check.
    let mode_only = build_momentum_hamiltonian(&spec, &params).unwrap();
    params.interaction = 8.0;
    let sector = low_sector(3, 8, 4);
    let u = fourier_map(&spec, &sector);
    let real = build_hamiltonian(&spec, &params).unwrap().to_dense(1 << 12).unwrap();
    let rows: Vec<usize> = sector.iter().map(|occ| basis_index(occ, 8)).collect();
    let restricted = Mat::from_fn(sector.len(), sector.len(), |r, c| real[(rows[r], rows[c])]);
    let conjugated = u.adjoint() * mode_only.to_dense(1 << 12).unwrap() * &u;
    assert!((&conjugated - &restricted).norm_max() > 1.0);
}
