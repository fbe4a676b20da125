use cavity_core::dense::{evolve, steady_state, DenseState, SolverOptions};
use cavity_core::fock::{local_annihilation, local_number, LatticeSpec};
use cavity_core::linalg::C64;
use cavity_core::model::{build_liouvillian, ModelParams};
use cavity_core::mpdo::{
    evolve_steps, relax_from, relax_to_steady, trotter_step, Checkpoint, InitialState, MpdoState, Propagators,
    RelaxOptions, RelaxProgress,
};
use cavity_core::observables::{density, g1, g2, variance, Expectation};
use faer::Mat;
use proptest::prelude::*;

fn fig3(drive: f64, hopping: f64) -> ModelParams {
    ModelParams::resonant(20.0, hopping, drive, vec![0.1, 1.0])
}

/// Largest deviation in density, variance, g1 and g2 over all sites and pairs.
fn max_observable_gap(a: &impl Expectation, b: &impl Expectation) -> f64 {
    let n = a.lattice().n_sites();
    let mut gap = 0.0f64;
    for i in 0..n {
        gap = gap.max((density(a, i).unwrap() - density(b, i).unwrap()).abs());
        gap = gap.max((variance(a, i).unwrap() - variance(b, i).unwrap()).abs());
        for j in 0..n {
            gap = gap.max((g1(a, i, j).unwrap() - g1(b, i, j).unwrap()).norm());
            gap = gap.max((g2(a, i, j).unwrap() - g2(b, i, j).unwrap()).abs());
        }
    }
    gap
}

fn dense_evolved(spec: &LatticeSpec, params: &ModelParams, t: f64) -> DenseState {
    let l = build_liouvillian(spec, params).unwrap();
    evolve(&DenseState::vacuum(spec).unwrap(), &l, t, 1e-3).unwrap()
}

fn tebd_evolved(spec: &LatticeSpec, params: &ModelParams, t: f64, dt: f64, chi: usize) -> MpdoState {
    let mut state = MpdoState::vacuum(spec, chi, 1e-12).unwrap();
    let props = Propagators::new(spec, params, dt).unwrap();
    evolve_steps(&mut state, &props, (t / dt).round() as usize).unwrap();
    state
}

#[test]
fn dark_vacuum_survives_a_step_unchanged() {
    let spec = LatticeSpec::open(4, 3).unwrap();
    let vacuum = MpdoState::vacuum(&spec, 8, 1e-10).unwrap();
    let (next, report) = trotter_step(&vacuum, &fig3(0.0, 0.0), 0.01).unwrap();
    assert_eq!(next.to_dense().unwrap().rho(), vacuum.to_dense().unwrap().rho());
    assert_eq!(report.trace_drift, 0.0);
}

#[test]
fn decoupled_chain_matches_single_site_evolution() {
    let params = fig3(5.0, 0.0);
    let chain = LatticeSpec::open(5, 3).unwrap();
    let state = tebd_evolved(&chain, &params, 3.0, 0.01, 8);
    assert_eq!(state.bond_dims(), vec![1; 4]);
    let reference = dense_evolved(&LatticeSpec::open(1, 3).unwrap(), &params, 3.0);
    for j in 0..5 {
        assert!((density(&state, j).unwrap() - density(&reference, 0).unwrap()).abs() <= 1e-8);
        assert!((variance(&state, j).unwrap() - variance(&reference, 0).unwrap()).abs() <= 1e-8);
    }
}

/// Largest deviation in density, variance and g2 (local and two-site).
fn max_diagonal_gap(a: &impl Expectation, b: &impl Expectation) -> f64 {
    let n = a.lattice().n_sites();
    let mut gap = 0.0f64;
    for i in 0..n {
        gap = gap.max((density(a, i).unwrap() - density(b, i).unwrap()).abs());
        gap = gap.max((variance(a, i).unwrap() - variance(b, i).unwrap()).abs());
        for j in 0..n {
            gap = gap.max((g2(a, i, j).unwrap() - g2(b, i, j).unwrap()).abs());
        }
    }
    gap
}

#[test]
fn three_site_chain_matches_dense_evolution() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let params = fig3(5.0, 0.5);
    let reference = dense_evolved(&spec, &params, 5.0);
    let state = tebd_evolved(&spec, &params, 5.0, 0.01, 64);
    let gap = max_diagonal_gap(&state, &reference);
    assert!(gap <= 1e-4, "gap {gap:e}");
    // Nearest-neighbour coherences carry the largest Trotter error; halve the step.
    let state = tebd_evolved(&spec, &params, 5.0, 0.005, 64);
    let gap = max_observable_gap(&state, &reference);
    assert!(gap <= 1e-4, "gap {gap:e}");
}

#[test]
fn trotter_error_is_second_order() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let params = fig3(5.0, 0.5);
    let reference = dense_evolved(&spec, &params, 2.0);
    let coarse = max_observable_gap(&tebd_evolved(&spec, &params, 2.0, 0.02, 64), &reference);
    let fine = max_observable_gap(&tebd_evolved(&spec, &params, 2.0, 0.01, 64), &reference);
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "errors {coarse:e} / {fine:e} = {ratio}");
}

#[test]
fn trace_is_conserved_without_truncation() {
    let spec = LatticeSpec::open(4, 3).unwrap();
    let props = Propagators::new(&spec, &fig3(5.0, 1.0), 0.01).unwrap();
    let mut state = MpdoState::mott(&spec, 81, 1e-10).unwrap();
    let report = evolve_steps(&mut state, &props, 300).unwrap();
    assert!(!report.bond_saturated);
    assert!(report.trace_drift <= 1e-6, "drift {:e}", report.trace_drift);
    assert!((state.trace() - C64::new(1.0, 0.0)).norm() <= 1e-12);

    let mut truncated = MpdoState::mott(&spec, 16, 1e-10).unwrap();
    let report = evolve_steps(&mut truncated, &props, 100).unwrap();
    assert!(report.bond_saturated && report.truncation_error > 0.0);
    assert!((truncated.trace() - C64::new(1.0, 0.0)).norm() <= 1e-12);
}

#[test]
fn hermitian_expectations_stay_real() {
    let spec = LatticeSpec::open(6, 3).unwrap();
    let n = local_number(3).unwrap();
    let a = local_annihilation(3).unwrap();
    let x = a.plus(&a.adjoint());
    let mut state = MpdoState::vacuum(&spec, 24, 1e-10).unwrap();
    let props = Propagators::new(&spec, &fig3(5.0, 1.0), 0.02).unwrap();
    for _ in 0..10 {
        evolve_steps(&mut state, &props, 20).unwrap();
        for j in 0..6 {
            assert!(state.local_expectation(&n, j).unwrap().im.abs() <= 1e-8);
            assert!(state.local_expectation(&x, j).unwrap().im.abs() <= 1e-8);
        }
    }
}

#[test]
fn undriven_relaxation_converges_immediately() {
    let spec = LatticeSpec::open(5, 3).unwrap();
    let opts = RelaxOptions { t_max: 50.0, ..RelaxOptions::default() };
    let (state, report) = relax_to_steady(&spec, &fig3(0.0, 1.0), &opts).unwrap();
    assert!(report.converged);
    assert!(report.t_reached <= 2.0 * opts.check_interval + 1e-12);
    assert_eq!(report.observable_drift, 0.0);
    for j in 0..5 {
        assert_eq!(density(&state, j).unwrap(), 0.0);
    }
}

#[test]
fn decoupled_relaxation_matches_single_site_steady_state() {
    let params = fig3(5.0, 0.0);
    let site = LatticeSpec::open(1, 3).unwrap();
    let (reference, _) = steady_state(&build_liouvillian(&site, &params).unwrap(), &SolverOptions::default()).unwrap();
    let chain = LatticeSpec::open(3, 3).unwrap();
    let opts = RelaxOptions { dt: 0.1, max_bond: 4, drift_tol: 1e-9, t_max: 2000.0, ..RelaxOptions::default() };
    let (state, report) = relax_to_steady(&chain, &params, &opts).unwrap();
    assert!(report.converged);
    for j in 0..3 {
        let r_state = state_marginal(&state, j);
        let r_ref = reference.reduced(0).unwrap();
        assert!((&r_state - &r_ref).norm_max() <= 1e-6, "site {j}");
    }
}

fn state_marginal(state: &MpdoState, site: usize) -> Mat<C64> {
    state.to_dense().unwrap().reduced(site).unwrap()
}

#[test]
fn relaxation_reaches_the_dense_steady_state() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let params = fig3(5.0, 0.5);
    let (reference, _) = steady_state(&build_liouvillian(&spec, &params).unwrap(), &SolverOptions::default()).unwrap();
    let opts = RelaxOptions { dt: 0.02, drift_tol: 1e-6, initial: InitialState::Mott, ..RelaxOptions::default() };
    let (state, report) = relax_to_steady(&spec, &params, &opts).unwrap();
    assert!(report.converged);
    let gap = max_observable_gap(&state, &reference);
    assert!(gap <= 1e-3, "gap {gap:e}");
}

#[test]
fn checkpoint_resume_reproduces_uninterrupted_run() {
    let spec = LatticeSpec::open(4, 3).unwrap();
    let params = fig3(5.0, 0.8);
    let base = RelaxOptions { dt: 0.02, max_bond: 12, t_max: 6.0, drift_tol: 1e-12, ..RelaxOptions::default() };
    let start = MpdoState::vacuum(&spec, base.max_bond, base.cutoff).unwrap();
    let (whole, whole_report, _) = relax_from(start.clone(), &params, &base, RelaxProgress::default()).unwrap();

    let first = RelaxOptions { t_max: 3.0, ..base.clone() };
    let (half, _, progress) = relax_from(start, &params, &first, RelaxProgress::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.ckpt");
    Checkpoint { state: half, params: params.clone(), progress }.save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.params, params);
    let (resumed, resumed_report, _) = relax_from(loaded.state, &loaded.params, &base, loaded.progress).unwrap();

    assert_eq!(resumed_report.steps, whole_report.steps);
    let gap = max_observable_gap(&resumed, &whole);
    assert!(gap <= 1e-10, "gap {gap:e}");
    assert_eq!(resumed.bond_dims(), whole.bond_dims());
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"MPDOCKPT\x01\x00\x00\x00garbage").unwrap();
    assert!(Checkpoint::load(&path).is_err());
    std::fs::write(&path, b"not a checkpoint").unwrap();
    assert!(Checkpoint::load(&path).is_err());
}

fn local_state(seed: &[f64], d: usize) -> Mat<C64> {
    // ρ = X X† / Tr, X from the seed.
    let x = Mat::from_fn(d, d, |r, c| C64::new(seed[r * d + c], seed[d * d + r * d + c]));
    let rho = &x * x.adjoint();
    let tr: C64 = (0..d).map(|k| rho[(k, k)]).sum();
    rho * faer::Scale(C64::new(1.0, 0.0) / tr)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn product_state_contractions_match_dense(seed in prop::collection::vec(-1.0f64..1.0, 54)) {
        let spec = LatticeSpec::open(3, 3).unwrap();
        let locals: Vec<Mat<C64>> = (0..3).map(|j| local_state(&seed[18 * j..18 * (j + 1)], 3)).collect();
        let mpdo = MpdoState::product(&spec, &locals, 4, 1e-12).unwrap();
        let dense = DenseState::product(&spec, &locals).unwrap();
        let a = local_annihilation(3).unwrap();
        let ad = a.adjoint();
        for i in 0..3 {
            prop_assert!((mpdo.local(&a, i).unwrap() - dense.local(&a, i).unwrap()).norm() <= 1e-12);
            for j in 0..3 {
                let m = mpdo.pair(&ad, i, &a, j).unwrap();
                let d = dense.pair(&ad, i, &a, j).unwrap();
                prop_assert!((m - d).norm() <= 1e-12);
            }
        }
        prop_assert!((mpdo.trace() - C64::new(1.0, 0.0)).norm() <= 1e-12);
    }
}
