//! Plane-wave mode picture of the periodic chain.
//!
//! With `a_n = N^{-1/2} Σ_k exp(2πi nk/N) b_k` the Hamiltonian becomes
//!
//! ```text
//! H = Σ_k [Ω/√2 b_k† b_{-k}† + h.c.] + Σ_k [Δ − 2J cos(2πk/N)] b_k† b_k
//!   + U/(2N) Σ_{l+m−j−k ≡ 0 (mod N)} b_j† b_k† b_l b_m
//! ```
//!
//! where `-k` is taken modulo `N`. The interaction prefactor follows from
//! `(U/2) Σ_n a_n† a_n† a_n a_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{embed, local_annihilation, Boundary, LatticeOperator, LatticeSpec};
use crate::linalg::C64;
use crate::model::ModelParams;

/// `Δ − 2J cos(2πk/N)`.
pub fn mode_detuning(k: usize, n: usize, delta: f64, hopping: f64) -> Result<f64> {
    if k >= n {
        return Err(Error::ModeOutOfRange { k, n });
    }
    Ok(delta - 2.0 * hopping * cos_2pi(k, n))
}

/// `cos(2πk/N)`, evaluated at `min(k, N − k)` so the spectrum is exactly
/// symmetric, with the quarter period returned as an exact zero so that
/// resonance at `k = N/4, 3N/4` survives a zero tolerance.
fn cos_2pi(k: usize, n: usize) -> f64 {
    let k = k.min(n - k);
    if 4 * k == n {
        0.0
    } else {
        (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub detunings: Vec<f64>,
    pub resonant: Vec<usize>,
}

pub fn resonant_modes(n: usize, delta: f64, hopping: f64, tol: f64) -> Result<ModeSpectrum> {
    if n == 0 {
        return Err(Error::InvalidLattice("at least one mode is required".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be nonnegative, got {tol}")));
    }
    let detunings = (0..n).map(|k| mode_detuning(k, n, delta, hopping)).collect::<Result<Vec<_>>>()?;
    let resonant = detunings.iter().enumerate().filter(|(_, d)| d.abs() <= tol).map(|(k, _)| k).collect();
    Ok(ModeSpectrum { detunings, resonant })
}

/// All `(j, k, l, m)` in `0..N` with `l + m − j − k ≡ 0 (mod N)`.
pub fn quartic_index_set(n: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(n * n * n);
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let m = (j + k + n - l % n) % n;
                out.push([j, k, l, m]);
            }
        }
    }
    out
}

/// Mode-basis Hamiltonian on the Fock space of `N` modes truncated at
/// `local_dim` each. Mode `k` occupies the slot of site `k`.
pub fn build_momentum_hamiltonian(spec: &LatticeSpec, params: &ModelParams) -> Result<LatticeOperator> {
    if spec.boundary() != Boundary::Periodic {
        return Err(Error::UnsupportedBoundary);
    }
    params.validate(spec)?;
    let n = spec.n_sites();
    let a = local_annihilation(spec.local_dim())?;
    let b: Vec<LatticeOperator> = (0..n).map(|k| embed(&a, k, spec)).collect::<Result<_>>()?;
    let bd: Vec<LatticeOperator> = b.iter().map(LatticeOperator::adjoint).collect();

    let mut h = LatticeOperator::zeros(spec);
    let pair = params.drive / std::f64::consts::SQRT_2;
    for k in 0..n {
        let partner = (n - k) % n;
        let create = bd[k].dot(&bd[partner]);
        h = h.plus(&create.scale(pair)).plus(&create.adjoint().scale(pair.conj()));
        let detuning = mode_detuning(k, n, params.delta, params.hopping)?;
        if detuning != 0.0 {
            h = h.plus(&bd[k].dot(&b[k]).scale(C64::new(detuning, 0.0)));
        }
    }
    if params.interaction != 0.0 {
        let coupling = C64::new(params.interaction / (2.0 * n as f64), 0.0);
        for [j, k, l, m] in quartic_index_set(n) {
            h = h.plus(&bd[j].dot(&bd[k]).dot(&b[l]).dot(&b[m]).scale(coupling));
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detuning_values() {
        assert_eq!(mode_detuning(0, 5, 0.3, 1.0).unwrap(), 0.3 - 2.0);
        assert_eq!(mode_detuning(1, 4, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(mode_detuning(3, 6, 0.3, 1.0).unwrap(), 0.3 + 2.0);
        assert!(matches!(mode_detuning(4, 4, 0.0, 1.0), Err(Error::ModeOutOfRange { k: 4, n: 4 })));
    }

    #[test]
    fn resonances() {
        assert_eq!(resonant_modes(8, 0.0, 1.0, 1e-12).unwrap().resonant, vec![2, 6]);
        assert_eq!(resonant_modes(8, 0.0, 1.0, 0.0).unwrap().resonant, vec![2, 6]);
        let off = resonant_modes(8, -10.0, 1.0, 1e-12).unwrap();
        assert!(off.resonant.is_empty());
        let min = off.detunings.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
        assert!((min - 8.0).abs() < 1e-12);
        assert_eq!(resonant_modes(5, 0.0, 0.0, 0.0).unwrap().resonant, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_mode_index_set() {
        let set = quartic_index_set(2);
        assert_eq!(set.len(), 8);
        assert!(set.iter().all(|[j, k, l, m]| (l + m + 4 - j - k) % 2 == 0));
    }

    #[test]
    fn open_boundary_rejected() {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let p = ModelParams::resonant(1.0, 0.1, 1.0, vec![0.1, 1.0]);
        assert!(matches!(build_momentum_hamiltonian(&spec, &p), Err(Error::UnsupportedBoundary)));
    }
}
