//! Real coordinates for single-site operators.
//!
//! The local superindex `s = a + d*b` labels an orthonormal Hermitian basis
//! `B_s`: `|a><a|` on the diagonal, `(|a><b| + |b><a|)/√2` for `a < b` and
//! `i(|a><b| − |b><a|)/√2` for `a > b`. A Hermitian `ρ` has real coordinates
//! `c_s = Tr(B_s ρ)`, and every Lindblad superoperator is a real matrix in
//! this basis, so truncated MPDOs stay exactly Hermitian.

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{kron, C64, ZERO};

/// `T[s, a + d*b] = conj(B_s[a, b])`, so `c = T vec(ρ)` and `vec(ρ) = T† c`.
pub(crate) fn basis_change(d: usize) -> Mat<C64> {
    let q = d * d;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = Mat::<C64>::zeros(q, q);
    for a in 0..d {
        for b in 0..d {
            let s = a + d * b;
            let (lo, hi) = (a.min(b), a.max(b));
            let (upper, lower) = (lo + d * hi, hi + d * lo);
            if a == b {
                t[(s, s)] = C64::new(1.0, 0.0);
            } else if a < b {
                t[(s, upper)] = C64::new(h, 0.0);
                t[(s, lower)] = C64::new(h, 0.0);
            } else {
                // B_s = i(|a><b| − |b><a|)/√2 with a > b: entry (a, b) is i/√2.
                t[(s, lower)] = C64::new(0.0, -h);
                t[(s, upper)] = C64::new(0.0, h);
            }
        }
    }
    t
}

fn real_part(m: &Mat<C64>) -> Result<Mat<f64>> {
    let scale = m.norm_max().max(1.0);
    let imag = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| (r, c))).map(|(r, c)| m[(r, c)].im.abs());
    let worst = imag.fold(0.0, f64::max);
    if worst > 1e-10 * scale {
        return Err(Error::Numerical(format!("superoperator is not real in the Hermitian basis (imaginary part {worst:e})")));
    }
    Ok(Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)].re))
}

/// `T G T†` for a single-site superoperator.
pub(crate) fn site_superop(g: &Mat<C64>) -> Result<Mat<f64>> {
    let d = (g.nrows() as f64).sqrt().round() as usize;
    let t = basis_change(d);
    real_part(&(&t * g * t.adjoint()))
}

/// `(T ⊗ T) G (T ⊗ T)†` for a superoperator on the pair index `s_i * d² + s_j`.
pub(crate) fn pair_superop(g: &Mat<C64>, d: usize) -> Result<Mat<f64>> {
    let t = basis_change(d);
    let tt = kron(&t, &t);
    real_part(&(&tt * g * tt.adjoint()))
}

/// Coordinates of a local operator's matrix.
pub(crate) fn coordinates(rho: &Mat<C64>) -> Vec<C64> {
    let d = rho.nrows();
    let t = basis_change(d);
    (0..d * d).map(|k| (0..d * d).map(|s| t[(k, s)] * rho[(s % d, s / d)]).sum()).collect()
}

/// `w` with `Tr(O ρ) = Σ_s w[s] c_s` for `ρ = Σ_s c_s B_s`.
pub(crate) fn trace_weights(op: &Mat<C64>) -> Vec<C64> {
    let d = op.nrows();
    let t = basis_change(d);
    // Tr(O ρ) = Σ_{a,b} O[b,a] ρ[a,b] and vec(ρ) = T† c.
    (0..d * d)
        .map(|k| {
            let mut acc = ZERO;
            for a in 0..d {
                for b in 0..d {
                    acc += op[(b, a)] * t[(k, a + d * b)].conj();
                }
            }
            acc
        })
        .collect()
}

/// `vec(ρ)` column-stacked from the coordinates `c`.
pub(crate) fn standard_vector(c: &[f64], d: usize) -> Vec<C64> {
    let t = basis_change(d);
    (0..d * d).map(|s| (0..d * d).map(|k| t[(k, s)].conj() * c[k]).sum()).collect()
}
