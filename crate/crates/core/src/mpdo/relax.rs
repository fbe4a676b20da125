use serde::{Deserialize, Serialize};

use super::{evolve_steps, MpdoState, Propagators};
use crate::error::{Error, Result};
use crate::fock::{local_annihilation, local_number, LatticeSpec};
use crate::model::ModelParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    #[default]
    Vacuum,
    /// `⊗|1><1|`; starts deep-lobe points close to their steady state.
    Mott,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RelaxOptions {
    pub dt: f64,
    pub max_bond: usize,
    pub cutoff: f64,
    pub t_max: f64,
    /// Convergence threshold on `max |d<O>/dt|` over tracked observables.
    pub drift_tol: f64,
    /// Time between observable samples.
    pub check_interval: f64,
    pub initial: InitialState,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            max_bond: 64,
            cutoff: 1e-10,
            t_max: 1000.0,
            drift_tol: 1e-6,
            check_interval: 1.0,
            initial: InitialState::Vacuum,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub t_reached: f64,
    /// Drift over the last sampling window, per unit time.
    pub observable_drift: f64,
    /// Largest discarded weight during the last window.
    pub final_truncation_error: f64,
    /// Largest pre-normalization trace drift of a single step.
    pub max_trace_drift: f64,
    pub bond_saturated: bool,
    pub max_bond_used: usize,
    pub steps: usize,
}

/// Resumable relaxation bookkeeping; stored in checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelaxProgress {
    pub elapsed: f64,
    pub steps: usize,
    pub last_sample: Option<Vec<f64>>,
    pub quiet_windows: usize,
    pub last_drift: f64,
    pub max_trace_drift: f64,
}

/// Densities on every site and `<a_j† a_{j+1}>` on every bond (real and
/// imaginary parts).
fn tracked_observables(state: &MpdoState) -> Result<Vec<f64>> {
    let d = state.spec().local_dim();
    let n = local_number(d)?;
    let a = local_annihilation(d)?;
    let ad = a.adjoint();
    let sites = state.spec().n_sites();
    let mut out = Vec::with_capacity(3 * sites);
    for j in 0..sites {
        out.push(state.local_expectation(&n, j)?.re);
    }
    for j in 0..sites.saturating_sub(1) {
        let c = state.two_point(&ad, j, &a, j + 1)?;
        out.push(c.re);
        out.push(c.im);
    }
    Ok(out)
}

pub fn relax_to_steady(
    spec: &LatticeSpec,
    params: &ModelParams,
    opts: &RelaxOptions,
) -> Result<(MpdoState, ConvergenceReport)> {
    let state = match opts.initial {
        InitialState::Vacuum => MpdoState::vacuum(spec, opts.max_bond, opts.cutoff)?,
        InitialState::Mott => MpdoState::mott(spec, opts.max_bond, opts.cutoff)?,
    };
    let (state, report, _) = relax_from(state, params, opts, RelaxProgress::default())?;
    Ok((state, report))
}

/// Continues a relaxation from `progress`. Sampling windows are aligned to
/// multiples of `check_interval` from the original start, so a run split at
/// a window boundary reproduces the uninterrupted one.
pub fn relax_from(
    mut state: MpdoState,
    params: &ModelParams,
    opts: &RelaxOptions,
    mut progress: RelaxProgress,
) -> Result<(MpdoState, ConvergenceReport, RelaxProgress)> {
    if !(opts.t_max > 0.0) {
        return Err(Error::InvalidParams(format!("t_max must be positive, got {}", opts.t_max)));
    }
    if !(opts.check_interval > 0.0) {
        return Err(Error::InvalidParams("check_interval must be positive".into()));
    }
    let props = Propagators::new(state.spec(), params, opts.dt)?;
    let steps_per_window = ((opts.check_interval / opts.dt).round() as usize).max(1);
    let total_steps = (opts.t_max / opts.dt - 1e-9).ceil() as usize;

    if progress.last_sample.is_none() {
        progress.last_sample = Some(tracked_observables(&state)?);
    }
    let mut converged = progress.quiet_windows >= 2;
    let mut window_truncation = 0.0f64;
    let mut saturated = false;
    while !converged && progress.steps < total_steps {
        let n = steps_per_window.min(total_steps - progress.steps);
        let report = evolve_steps(&mut state, &props, n)?;
        progress.steps += n;
        progress.elapsed = progress.steps as f64 * opts.dt;
        progress.max_trace_drift = progress.max_trace_drift.max(report.trace_drift);
        window_truncation = report.truncation_error;
        saturated |= report.bond_saturated;

        let sample = tracked_observables(&state)?;
        let prev = progress.last_sample.as_ref().expect("sampled before loop");
        let drift = sample.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / (n as f64 * opts.dt);
        if !drift.is_finite() {
            return Err(Error::Numerical(format!("observables diverged at t = {}", progress.elapsed)));
        }
        progress.last_drift = drift;
        progress.last_sample = Some(sample);
        progress.quiet_windows = if drift < opts.drift_tol { progress.quiet_windows + 1 } else { 0 };
        converged = progress.quiet_windows >= 2;
        log::trace!("t = {:.3}: drift {drift:.3e}, bonds {:?}", progress.elapsed, state.bond_dims());
    }
    if saturated {
        log::debug!("bond dimension {} saturated during relaxation", state.max_bond());
    }
    let report = ConvergenceReport {
        converged,
        t_reached: progress.elapsed,
        observable_drift: progress.last_drift,
        final_truncation_error: window_truncation,
        max_trace_drift: progress.max_trace_drift,
        bond_saturated: saturated,
        max_bond_used: state.bond_dims().into_iter().max().unwrap_or(1),
        steps: progress.steps,
    };
    Ok((state, report, progress))
}
