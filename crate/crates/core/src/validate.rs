//! Quick self-checks against closed-form and cross-solver references.

use serde::Serialize;

use crate::dense::{evolve, residual, steady_state, DenseState, SolverOptions};
use crate::error::Result;
use crate::fock::LatticeSpec;
use crate::linalg::C64;
use crate::model::{build_liouvillian, ModelParams};
use crate::momentum::resonant_modes;
use crate::mpdo::{evolve_steps, MpdoState, Propagators};
use crate::observables::{density, fit_correlation_length, variance, CorrelationRow, FitOptions};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> Check {
    match outcome {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check { name, passed: false, detail: format!("error: {e}") },
    }
}

fn trace_annihilation() -> Result<(bool, String)> {
    let spec = LatticeSpec::periodic(3, 3)?;
    let params = ModelParams::resonant(20.0, 0.7, 3.0, vec![0.1, 1.0]);
    let defect = build_liouvillian(&spec, &params)?.trace_defect();
    Ok((defect <= 1e-12, format!("max |(vec I)ᵀ L| = {defect:.2e}")))
}

fn amplitude_damping() -> Result<(bool, String)> {
    let spec = LatticeSpec::open(1, 2)?;
    let params = ModelParams { delta: 0.0, interaction: 0.0, hopping: 0.0, drive: C64::new(0.0, 0.0), gammas: vec![1.0] };
    let l = build_liouvillian(&spec, &params)?;
    let excited = DenseState::fock_product(&spec, &[1])?;
    let p1 = evolve(&excited, &l, 1.0, 1e-3)?.site_populations(0)?[1];
    let err = (p1 - (-1.0f64).exp()).abs();
    Ok((err <= 1e-10, format!("p1(1) − e⁻¹ = {err:.2e}")))
}

fn saturation() -> Result<(bool, String)> {
    let spec = LatticeSpec::open(1, 3)?;
    let params = ModelParams::resonant(100.0, 0.0, 20.0, vec![0.1, 1.0]);
    let (state, _) = steady_state(&build_liouvillian(&spec, &params)?, &SolverOptions::default())?;
    let (n, var) = (density(&state, 0)?, variance(&state, 0)?);
    let passed = (n - 1.0).abs() <= 0.02 && (var - 1.0 / 6.0).abs() <= 0.02;
    Ok((passed, format!("<n> = {n:.5}, Var(n) = {var:.5}")))
}

fn steady_residual() -> Result<(bool, String)> {
    let spec = LatticeSpec::open(2, 3)?;
    let params = ModelParams::resonant(20.0, 0.5, 5.0, vec![0.1, 1.0]);
    let l = build_liouvillian(&spec, &params)?;
    let (state, _) = steady_state(&l, &SolverOptions::default())?;
    let r = residual(&l, &state);
    Ok((r <= 1e-10, format!("‖L vec ρ‖ = {r:.2e}")))
}

fn resonance_rule() -> Result<(bool, String)> {
    let modes = resonant_modes(8, 0.0, 1.0, 1e-12)?.resonant;
    Ok((modes == [2, 6], format!("resonant modes {modes:?}")))
}

fn fit_recovery() -> Result<(bool, String)> {
    let values = (0..11).map(|j| C64::new((-(j as f64 - 5.0).abs() / 2.0).exp(), 0.0)).collect();
    let fit = fit_correlation_length(&CorrelationRow { anchor: 5, values, params: None }, &FitOptions::default())?;
    let err = (fit.lambda - 2.0).abs();
    Ok((err <= 1e-9, format!("λ − 2 = {err:.2e}")))
}

fn decoupled_tebd() -> Result<(bool, String)> {
    let params = ModelParams::resonant(20.0, 0.0, 5.0, vec![0.1, 1.0]);
    let chain = LatticeSpec::open(3, 3)?;
    let props = Propagators::new(&chain, &params, 0.01)?;
    let mut state = MpdoState::vacuum(&chain, 4, 1e-12)?;
    evolve_steps(&mut state, &props, 200)?;

    let site = LatticeSpec::open(1, 3)?;
    let reference = evolve(&DenseState::vacuum(&site)?, &build_liouvillian(&site, &params)?, 2.0, 1e-3)?;
    let mut err = 0.0f64;
    for j in 0..3 {
        err = err.max((density(&state, j)? - density(&reference, 0)?).abs());
    }
    Ok((err <= 1e-8, format!("max density deviation {err:.2e}")))
}

/// Runs every check; none of them takes more than a second.
pub fn run_all() -> Vec<Check> {
    vec![
        check("liouvillian-trace", trace_annihilation()),
        check("amplitude-damping", amplitude_damping()),
        check("saturation", saturation()),
        check("steady-residual", steady_residual()),
        check("resonance-rule", resonance_rule()),
        check("fit-recovery", fit_recovery()),
        check("decoupled-tebd", decoupled_tebd()),
    ]
}
