//! Densities, number fluctuations, coherence functions and the exponential
//! fit of the first-order coherence.

use serde::{Deserialize, Serialize};

use crate::dense::DenseState;
use crate::error::{Error, Result};
use crate::fock::{embed, local_annihilation, local_number, LatticeSpec, LocalOperator};
use crate::linalg::{C64, ZERO};
use crate::model::ModelParams;
use crate::mpdo::MpdoState;

/// Negative variances down to this value are rounding noise and clip to 0.
pub const VARIANCE_CLIP: f64 = 1e-8;
/// Largest imaginary part tolerated in `g2` before it is reported as an error.
pub const G2_IMAG_TOL: f64 = 1e-8;
/// Default noise floor for `|g1|` values entering the fit.
pub const FIT_NOISE_FLOOR: f64 = 1e-8;

/// Expectation values of local operators in a (possibly unnormalized) state.
pub trait Expectation {
    fn lattice(&self) -> &LatticeSpec;

    /// `Tr(O_j ρ) / Tr ρ`.
    fn local(&self, op: &LocalOperator, site: usize) -> Result<C64>;

    /// `Tr(A_i B_j ρ) / Tr ρ`; equals `local(A B, i)` when `i == j`.
    fn pair(&self, a: &LocalOperator, i: usize, b: &LocalOperator, j: usize) -> Result<C64>;
}

impl Expectation for DenseState {
    fn lattice(&self) -> &LatticeSpec {
        self.spec()
    }

    fn local(&self, op: &LocalOperator, site: usize) -> Result<C64> {
        let reduced = self.reduced(site)?;
        if op.dim() != reduced.nrows() {
            return Err(Error::DimensionMismatch { expected: reduced.nrows(), found: op.dim() });
        }
        let d = op.dim();
        let mut acc = ZERO;
        for r in 0..d {
            for c in 0..d {
                acc += op.entry(r, c) * reduced[(c, r)];
            }
        }
        Ok(acc / self.trace())
    }

    fn pair(&self, a: &LocalOperator, i: usize, b: &LocalOperator, j: usize) -> Result<C64> {
        if i == j {
            self.spec().check_site(i)?;
            return self.local(&a.dot(b), i);
        }
        let op = embed(a, i, self.spec())?.dot(&embed(b, j, self.spec())?);
        let rho = self.rho();
        let acc = op.matrix().iter().fold(ZERO, |acc, (r, c, v)| acc + v * rho[(c, r)]);
        Ok(acc / self.trace())
    }
}

impl Expectation for MpdoState {
    fn lattice(&self) -> &LatticeSpec {
        self.spec()
    }

    fn local(&self, op: &LocalOperator, site: usize) -> Result<C64> {
        self.local_expectation(op, site)
    }

    fn pair(&self, a: &LocalOperator, i: usize, b: &LocalOperator, j: usize) -> Result<C64> {
        self.two_point(a, i, b, j)
    }
}

fn ops(state: &impl Expectation) -> Result<(LocalOperator, LocalOperator, LocalOperator)> {
    let d = state.lattice().local_dim();
    let a = local_annihilation(d)?;
    Ok((a.adjoint(), a, local_number(d)?))
}

/// `Re <n_j>`.
pub fn density(state: &impl Expectation, site: usize) -> Result<f64> {
    let d = state.lattice().local_dim();
    Ok(state.local(&local_number(d)?, site)?.re)
}

/// `Re(<n_j²> − <n_j>²)`, clipped at zero within [`VARIANCE_CLIP`].
pub fn variance(state: &impl Expectation, site: usize) -> Result<f64> {
    let n = local_number(state.lattice().local_dim())?;
    let mean = state.local(&n, site)?.re;
    let second = state.local(&n.dot(&n), site)?.re;
    let var = second - mean * mean;
    if var < 0.0 && var >= -VARIANCE_CLIP {
        Ok(0.0)
    } else {
        Ok(var)
    }
}

fn positive_density(state: &impl Expectation, n: &LocalOperator, site: usize) -> Result<f64> {
    let value = state.local(n, site)?.re;
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::UndefinedCorrelation { site })
    }
}

/// `<a_i† a_j> / sqrt(<n_i><n_j>)`.
pub fn g1(state: &impl Expectation, i: usize, j: usize) -> Result<C64> {
    let (ad, a, n) = ops(state)?;
    let ni = positive_density(state, &n, i)?;
    let nj = positive_density(state, &n, j)?;
    Ok(state.pair(&ad, i, &a, j)? / (ni * nj).sqrt())
}

/// `<a_i† a_j† a_j a_i> / (<n_i><n_j>)`.
pub fn g2(state: &impl Expectation, i: usize, j: usize) -> Result<f64> {
    g2_with_tolerance(state, i, j, G2_IMAG_TOL)
}

/// [`g2`] with an explicit bound on the discarded imaginary part. Truncated
/// MPDOs are Hermitian only up to their discarded weight.
pub fn g2_with_tolerance(state: &impl Expectation, i: usize, j: usize, imag_tol: f64) -> Result<f64> {
    let (ad, a, n) = ops(state)?;
    let ni = positive_density(state, &n, i)?;
    let nj = positive_density(state, &n, j)?;
    let numerator = if i == j {
        state.local(&ad.dot(&ad).dot(&a).dot(&a), i)?
    } else {
        state.pair(&n, i, &n, j)?
    };
    if numerator.im.abs() > imag_tol {
        return Err(Error::NonRealObservable(numerator.im));
    }
    Ok(numerator.re / (ni * nj))
}

/// `g1(anchor, j)` for every site `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub anchor: usize,
    pub values: Vec<C64>,
    pub params: Option<ModelParams>,
}

pub fn g1_row(state: &impl Expectation, anchor: usize) -> Result<CorrelationRow> {
    let n = state.lattice().n_sites();
    let values = (0..n).map(|j| g1(state, anchor, j)).collect::<Result<Vec<_>>>()?;
    Ok(CorrelationRow { anchor, values, params: None })
}

/// `g2(anchor, j)` for every site `j`.
pub fn g2_row(state: &impl Expectation, anchor: usize, imag_tol: f64) -> Result<Vec<f64>> {
    let n = state.lattice().n_sites();
    (0..n).map(|j| g2_with_tolerance(state, anchor, j, imag_tol)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Fit `log A` as a free intercept; otherwise `A = 1`.
    pub free_amplitude: bool,
    pub noise_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { free_amplitude: true, noise_floor: FIT_NOISE_FLOOR }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Correlation length in sites; `+inf` when the data does not decay.
    pub lambda: f64,
    pub amplitude: f64,
    /// RMS residual of the log-space fit.
    pub rms_residual: f64,
    pub n_points: usize,
    pub success: bool,
}

/// Fits `|g1(j0, j)| = A exp(−|j − j0| / λ)` by linear least squares on
/// `log |g1|`, excluding the anchor and values below the noise floor.
pub fn fit_correlation_length(row: &CorrelationRow, opts: &FitOptions) -> Result<FitResult> {
    let points: Vec<(f64, f64)> = row
        .values
        .iter()
        .enumerate()
        .filter(|&(j, g)| j != row.anchor && g.norm() > opts.noise_floor && g.norm().is_finite())
        .map(|(j, g)| ((j as f64 - row.anchor as f64).abs(), g.norm().ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::FitFailure(format!("{} usable points, need at least 3", points.len())));
    }
    let m = points.len() as f64;
    let (slope, intercept) = if opts.free_amplitude {
        let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
        let my = points.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx == 0.0 {
            return Err(Error::FitFailure("all points at the same distance".into()));
        }
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    } else {
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (sxy / sxx, 0.0)
    };
    let rms_residual = (points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    let amplitude = intercept.exp();
    if slope >= 0.0 {
        return Ok(FitResult { lambda: f64::INFINITY, amplitude, rms_residual, n_points: points.len(), success: false });
    }
    Ok(FitResult { lambda: -1.0 / slope, amplitude, rms_residual, n_points: points.len(), success: true })
}
