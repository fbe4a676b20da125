//! Exact steady states and time evolution for small lattices.
//!
//! The steady state is the normalized null vector of the Liouvillian. One row
//! of `L` is redundant (`vec(I)ᵀ L = 0`), so it is replaced by the trace
//! condition and the resulting nonsingular system is solved with a sparse LU.

use std::time::Instant;

use faer::linalg::solvers::{Solve, SolveCore};
use faer::{Conj, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{LatticeSpec, DENSE_DIM_LIMIT};
use crate::linalg::{kron, vec_norm, SparseMatrix, C64, ONE, ZERO};
use crate::model::Liouvillian;

/// Eigenvalues in `[-CLIP, 0)` are set to zero when a state is sanitized.
pub const EIGEN_CLIP: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DenseState {
    rho: Mat<C64>,
    spec: LatticeSpec,
}

impl DenseState {
    pub fn new(rho: Mat<C64>, spec: LatticeSpec) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: rho.nrows() });
        }
        Ok(Self { rho, spec })
    }

    fn checked_dim(spec: &LatticeSpec) -> Result<usize> {
        let dim = spec.hilbert_dim();
        if dim > DENSE_DIM_LIMIT {
            return Err(Error::TooLarge { dim, budget: DENSE_DIM_LIMIT });
        }
        Ok(dim)
    }

    pub fn vacuum(spec: &LatticeSpec) -> Result<Self> {
        Self::fock_product(spec, &vec![0; spec.n_sites()])
    }

    /// `|n_0 n_1 ...><n_0 n_1 ...|`.
    pub fn fock_product(spec: &LatticeSpec, occupations: &[usize]) -> Result<Self> {
        let dim = Self::checked_dim(spec)?;
        if occupations.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch { expected: spec.n_sites(), found: occupations.len() });
        }
        let d = spec.local_dim();
        if let Some(&n) = occupations.iter().find(|&&n| n >= d) {
            return Err(Error::InvalidLevel { level: n, dim: d });
        }
        let index = occupations.iter().fold(0, |acc, &n| acc * d + n);
        let mut rho = Mat::<C64>::zeros(dim, dim);
        rho[(index, index)] = ONE;
        Ok(Self { rho, spec: spec.clone() })
    }

    pub fn maximally_mixed(spec: &LatticeSpec) -> Result<Self> {
        let dim = Self::checked_dim(spec)?;
        let rho = Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(1.0 / dim as f64, 0.0) } else { ZERO });
        Ok(Self { rho, spec: spec.clone() })
    }

    /// Tensor product of single-site density matrices, site 0 first.
    pub fn product(spec: &LatticeSpec, locals: &[Mat<C64>]) -> Result<Self> {
        Self::checked_dim(spec)?;
        if locals.len() != spec.n_sites() {
            return Err(Error::DimensionMismatch { expected: spec.n_sites(), found: locals.len() });
        }
        let d = spec.local_dim();
        if let Some(m) = locals.iter().find(|m| m.nrows() != d || m.ncols() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: m.nrows() });
        }
        let rho = locals[1..].iter().fold(locals[0].clone(), |acc, m| kron(&acc, m));
        Ok(Self { rho, spec: spec.clone() })
    }

    pub fn from_vec(spec: &LatticeSpec, v: &[C64]) -> Result<Self> {
        let dim = spec.hilbert_dim();
        if v.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: v.len() });
        }
        Ok(Self { rho: Mat::from_fn(dim, dim, |a, b| v[a + dim * b]), spec: spec.clone() })
    }

    /// Column-stacked `vec(ρ)`.
    pub fn to_vec(&self) -> Vec<C64> {
        let dim = self.dim();
        let mut v = Vec::with_capacity(dim * dim);
        for b in 0..dim {
            for a in 0..dim {
                v.push(self.rho[(a, b)]);
            }
        }
        v
    }

    pub fn rho(&self) -> &Mat<C64> {
        &self.rho
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.rho[(i, i)]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut err = 0.0f64;
        for j in 0..dim {
            for i in 0..=j {
                err = err.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.rho
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical(format!("{e:?}")))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn normalized(mut self) -> Self {
        let tr = self.trace();
        self.rho = &self.rho * faer::Scale(ONE / tr);
        self
    }

    pub fn hermitized(mut self) -> Self {
        let h = &self.rho + self.rho.adjoint();
        self.rho = &h * faer::Scale(C64::new(0.5, 0.0));
        self
    }

    /// Hermitizes, zeroes eigenvalues in `[-EIGEN_CLIP, 0)` and renormalizes.
    /// The state is rebuilt from its eigendecomposition only when clipping
    /// actually changes an eigenvalue.
    pub fn sanitized(self) -> Result<Self> {
        let mut state = self.hermitized();
        let eig = state.rho.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("{e:?}")))?;
        let values: Vec<f64> = (0..state.dim()).map(|i| eig.S()[i].re).collect();
        if values.iter().any(|&v| (-EIGEN_CLIP..0.0).contains(&v)) {
            let u = eig.U();
            let clipped: Vec<f64> =
                values.iter().map(|&v| if (-EIGEN_CLIP..0.0).contains(&v) { 0.0 } else { v }).collect();
            let scaled = Mat::from_fn(state.dim(), state.dim(), |i, k| u[(i, k)] * clipped[k]);
            state.rho = &scaled * u.adjoint();
            state = state.hermitized();
        }
        Ok(state.normalized())
    }

    /// Occupation probabilities of site `j`, `p_j(n)` for `n = 0..d`.
    pub fn site_populations(&self, site: usize) -> Result<Vec<f64>> {
        let rho_j = self.reduced(site)?;
        Ok((0..self.spec.local_dim()).map(|n| rho_j[(n, n)].re).collect())
    }

    /// Single-site reduced density matrix.
    pub fn reduced(&self, site: usize) -> Result<Mat<C64>> {
        self.spec.check_site(site)?;
        let d = self.spec.local_dim();
        let right = d.pow((self.spec.n_sites() - 1 - site) as u32);
        let left = d.pow(site as u32);
        let mut out = Mat::<C64>::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = ZERO;
                for l in 0..left {
                    for r in 0..right {
                        acc += self.rho[((l * d + a) * right + r, (l * d + b) * right + r)];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Required `‖L vec(ρ)‖₂`.
    pub tol: f64,
    /// Largest Hilbert-space dimension accepted.
    pub max_dim: usize,
    /// Iterative-refinement sweeps after the direct solve.
    pub refine_steps: usize,
    /// Time horizon of the time-marching fallback.
    pub fallback_t_max: f64,
    /// Estimate the two smallest singular values of the constrained system.
    pub uniqueness_diagnostic: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_dim: DENSE_DIM_LIMIT, refine_steps: 2, fallback_t_max: 500.0, uniqueness_diagnostic: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    NullSpace,
    TimeMarch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub residual: f64,
    pub method: SolveMethod,
    pub iterations: usize,
    pub wall_time: f64,
    /// Two smallest singular values of the trace-constrained system
    /// (`NaN` when not computed).
    pub smallest_singular_values: [f64; 2],
}

/// `‖L vec(ρ)‖₂`.
pub fn residual(liouvillian: &Liouvillian, state: &DenseState) -> f64 {
    vec_norm(&liouvillian.apply(&state.to_vec()))
}

/// `L` with row 0 replaced by the trace functional.
fn constrained_system(liouvillian: &Liouvillian) -> SparseMatrix {
    let dim = liouvillian.hilbert_dim();
    let n = dim * dim;
    let triplets = liouvillian
        .matrix()
        .iter()
        .filter(|&(r, _, _)| r != 0)
        .chain((0..dim).map(|a| (0, a + dim * a, ONE)));
    SparseMatrix::from_triplets(n, n, triplets)
}

const DENSE_SVD_LIMIT: usize = 1024;
const DEGENERACY_TOL: f64 = 1e-11;

fn dense_smallest_singular_values(m: &SparseMatrix) -> Result<[f64; 2]> {
    let mut s = m.to_dense().singular_values().map_err(|e| Error::Numerical(format!("{e:?}")))?;
    s.sort_by(f64::total_cmp);
    Ok([s[0], s.get(1).copied().unwrap_or(f64::NAN)])
}

/// Subspace inverse iteration on `(MᴴM)⁻¹` with two vectors.
fn estimate_smallest_singular_values<S: SolveCore<C64>>(lu: &S, n: usize) -> [f64; 2] {
    let mut v = Mat::from_fn(n, 2, |i, k| {
        let x = (i as f64 + 1.0) * (0.618_033_988_749_895 + k as f64 * 0.414_213_562);
        C64::new((x * 12.9898).sin(), (x * 78.233).cos())
    });
    orthonormalize(&mut v);
    for _ in 0..12 {
        lu.solve_in_place_with_conj(Conj::No, v.as_mut());
        lu.solve_transpose_in_place_with_conj(Conj::Yes, v.as_mut());
        if !v.norm_max().is_finite() {
            return [0.0, f64::NAN];
        }
        orthonormalize(&mut v);
    }
    let mut w = v.clone();
    lu.solve_in_place_with_conj(Conj::No, w.as_mut());
    let gram = w.adjoint() * &w;
    match gram.self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) if ev.iter().all(|x| x.is_finite() && *x > 0.0) => {
            let mut s: Vec<f64> = ev.iter().map(|e| 1.0 / e.sqrt()).collect();
            s.sort_by(f64::total_cmp);
            [s[0], s[1]]
        }
        _ => [0.0, f64::NAN],
    }
}

fn orthonormalize(v: &mut Mat<C64>) {
    for k in 0..v.ncols() {
        for p in 0..k {
            let proj: C64 = (0..v.nrows()).map(|i| v[(i, p)].conj() * v[(i, k)]).sum();
            for i in 0..v.nrows() {
                let x = v[(i, p)];
                v[(i, k)] -= proj * x;
            }
        }
        let norm = (0..v.nrows()).map(|i| v[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..v.nrows() {
            v[(i, k)] /= norm;
        }
    }
}

fn vec_trace(v: &[C64], dim: usize) -> C64 {
    (0..dim).map(|a| v[a + dim * a]).sum()
}

/// Steady state of `L`, normalized, Hermitized and eigenvalue-clipped.
pub fn steady_state(liouvillian: &Liouvillian, opts: &SolverOptions) -> Result<(DenseState, SolveReport)> {
    let start = Instant::now();
    let spec = liouvillian.spec();
    let dim = liouvillian.hilbert_dim();
    if dim > opts.max_dim {
        return Err(Error::TooLarge { dim, budget: opts.max_dim });
    }
    let n = dim * dim;
    let system = constrained_system(liouvillian);
    let scale = system.norm_max().max(1.0);

    let lu = system.to_faer().sp_lu().ok();
    let mut sigma = [f64::NAN; 2];
    let mut solution = None;
    if let Some(lu) = &lu {
        let mut rhs = Mat::<C64>::zeros(n, 1);
        rhs[(0, 0)] = ONE;
        let mut x = rhs.clone();
        lu.solve_in_place(x.as_mut());
        for _ in 0..opts.refine_steps {
            let xv: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
            let ax = system.mul_vec(&xv);
            let mut r = Mat::from_fn(n, 1, |i, _| rhs[(i, 0)] - ax[i]);
            lu.solve_in_place(r.as_mut());
            x += &r;
        }
        let xv: Vec<C64> = (0..n).map(|i| x[(i, 0)]).collect();
        if opts.uniqueness_diagnostic || !xv.iter().all(|v| v.is_finite()) {
            sigma = if n <= DENSE_SVD_LIMIT {
                dense_smallest_singular_values(&system)?
            } else {
                estimate_smallest_singular_values(lu, n)
            };
        }
        if xv.iter().all(|v| v.is_finite()) {
            solution = Some(xv);
        }
    } else if n <= DENSE_SVD_LIMIT {
        sigma = dense_smallest_singular_values(&system)?;
    }

    if sigma[0].is_finite() && sigma[0] < DEGENERACY_TOL * scale || (lu.is_some() && solution.is_none()) {
        return Err(Error::DegenerateSteadyState { sigma, residual: f64::NAN });
    }

    if let Some(xv) = solution {
        let state = DenseState::from_vec(spec, &xv)?.normalized().hermitized();
        let res = residual(liouvillian, &state);
        if res <= opts.tol {
            let state = state.sanitized()?;
            let report = SolveReport {
                residual: residual(liouvillian, &state),
                method: SolveMethod::NullSpace,
                iterations: 1 + opts.refine_steps,
                wall_time: start.elapsed().as_secs_f64(),
                smallest_singular_values: sigma,
            };
            return Ok((state, report));
        }
        log::warn!("direct steady-state solve left residual {res:e}; falling back to time marching");
    }

    let (state, steps, res) = march_to_steady(liouvillian, opts)?;
    if res > opts.tol {
        return Err(Error::DegenerateSteadyState { sigma, residual: res });
    }
    let state = state.sanitized()?;
    let report = SolveReport {
        residual: residual(liouvillian, &state),
        method: SolveMethod::TimeMarch,
        iterations: steps,
        wall_time: start.elapsed().as_secs_f64(),
        smallest_singular_values: sigma,
    };
    Ok((state, report))
}

fn march_to_steady(liouvillian: &Liouvillian, opts: &SolverOptions) -> Result<(DenseState, usize, f64)> {
    let spec = liouvillian.spec();
    let row_sum = (0..liouvillian.matrix().nrows())
        .map(|r| liouvillian.matrix().row(r).map(|(_, v)| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let dt = 2.0 / row_sum.max(1.0);
    let chunk = 1.0f64.max(dt);
    let mut state = DenseState::maximally_mixed(spec)?;
    let mut t = 0.0;
    let mut steps = 0;
    let mut res = residual(liouvillian, &state);
    while t < opts.fallback_t_max && res > opts.tol {
        state = evolve(&state, liouvillian, chunk, dt)?;
        t += chunk;
        steps += (chunk / dt).ceil() as usize;
        res = residual(liouvillian, &state);
    }
    Ok((state, steps, res))
}

/// Classic fourth-order Runge-Kutta on `vec(ρ)` with a fixed step. The step
/// is shrunk to divide `t_final` evenly; the trace is renormalized only at
/// the end.
pub fn evolve(state: &DenseState, liouvillian: &Liouvillian, t_final: f64, dt: f64) -> Result<DenseState> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParams(format!("need dt > 0 and t_final >= 0, got dt={dt}, t_final={t_final}")));
    }
    if state.spec() != liouvillian.spec() {
        return Err(Error::DimensionMismatch { expected: liouvillian.hilbert_dim(), found: state.dim() });
    }
    if t_final == 0.0 {
        return Ok(state.clone());
    }
    let dim = state.dim();
    let steps = (t_final / dt).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let l = liouvillian.matrix();
    let mut x = state.to_vec();
    let tr0 = vec_trace(&x, dim);
    let n = x.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; n], vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]);
    let mut tmp = vec![ZERO; n];
    for _ in 0..steps {
        l.mul_vec_into(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + k1[i] * (h / 2.0);
        }
        l.mul_vec_into(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + k2[i] * (h / 2.0);
        }
        l.mul_vec_into(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + k3[i] * h;
        }
        l.mul_vec_into(&tmp, &mut k4);
        for i in 0..n {
            x[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        let drift = (vec_trace(&x, dim) - tr0).norm();
        if !(drift <= 1e-3) {
            return Err(Error::UnstableStep { drift, dt: h });
        }
    }
    Ok(DenseState::from_vec(state.spec(), &x)?.normalized())
}
