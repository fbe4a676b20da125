use cavity_core::dense::DenseState;
use cavity_core::fock::LatticeSpec;
use cavity_core::linalg::C64;
use cavity_core::observables::{
    density, fit_correlation_length, g1, g1_row, g2, variance, CorrelationRow, FitOptions,
};
use cavity_core::Error;
use faer::Mat;
use proptest::prelude::*;

/// `X X† / Tr(X X†)` for a 27×27 `X` filled from `seed`.
fn random_state(seed: &[f64]) -> DenseState {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let dim = spec.hilbert_dim();
    let x = Mat::from_fn(dim, dim, |r, c| C64::new(seed[(r * dim + c) % seed.len()], seed[(7 * r + 3 * c + 1) % seed.len()]));
    let rho = &x * x.adjoint();
    let tr: C64 = (0..dim).map(|k| rho[(k, k)]).sum();
    DenseState::new(rho * faer::Scale(C64::new(1.0, 0.0) / tr), spec).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn g1_is_hermitian_and_bounded(seed in prop::collection::vec(-1.0f64..1.0, 101)) {
        let state = random_state(&seed);
        for i in 0..3 {
            prop_assert!((g1(&state, i, i).unwrap() - C64::new(1.0, 0.0)).norm() <= 1e-12);
            for j in 0..3 {
                let (a, b) = (g1(&state, i, j).unwrap(), g1(&state, j, i).unwrap());
                prop_assert!((a - b.conj()).norm() <= 1e-10);
                prop_assert!(a.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn g2_is_symmetric(seed in prop::collection::vec(-1.0f64..1.0, 101)) {
        let state = random_state(&seed);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((g2(&state, i, j).unwrap() - g2(&state, j, i).unwrap()).abs() <= 1e-10);
            }
            prop_assert!(variance(&state, i).unwrap() >= 0.0);
        }
    }

    #[test]
    fn fit_tolerates_one_percent_noise(
        lambda in 0.5f64..5.0,
        amplitude in 0.2f64..1.0,
        noise in prop::collection::vec(-0.01f64..0.01, 11),
    ) {
        let anchor = 5;
        let values = (0..11)
            .map(|j| {
                let r = (j as f64 - anchor as f64).abs();
                C64::new(amplitude * (-r / lambda).exp() * (1.0 + noise[j]), 0.0)
            })
            .collect();
        let row = CorrelationRow { anchor, values, params: None };
        let fit = fit_correlation_length(&row, &FitOptions::default()).unwrap();
        prop_assert!(fit.success);
        prop_assert!((fit.lambda - lambda).abs() <= 0.05 * lambda, "λ = {} fitted {}", lambda, fit.lambda);
        prop_assert!(fit.rms_residual >= 0.0);
    }
}

#[test]
fn fock_states_have_sharp_number() {
    let spec = LatticeSpec::open(3, 3).unwrap();
    let state = DenseState::fock_product(&spec, &[0, 1, 2]).unwrap();
    for (j, n) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        assert_eq!(density(&state, j).unwrap(), n);
        assert_eq!(variance(&state, j).unwrap(), 0.0);
    }
    assert!(matches!(g1(&state, 0, 1), Err(Error::UndefinedCorrelation { site: 0 })));
    assert_eq!(g2(&state, 1, 1).unwrap(), 0.0);
    assert!((g2(&state, 2, 2).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(g2(&state, 1, 2).unwrap(), 1.0);
}

#[test]
fn row_is_normalized_at_the_anchor() {
    let seed: Vec<f64> = (0..101).map(|k| ((k as f64) * 0.731).sin()).collect();
    let state = random_state(&seed);
    let row = g1_row(&state, 1).unwrap();
    assert_eq!(row.values.len(), 3);
    assert!((row.values[1] - C64::new(1.0, 0.0)).norm() <= 1e-12);
}

#[test]
fn flat_rows_are_not_fitted_as_decaying() {
    let row = CorrelationRow { anchor: 2, values: vec![C64::new(0.5, 0.0); 7], params: None };
    let fit = fit_correlation_length(&row, &FitOptions::default()).unwrap();
    assert!(!fit.success);
    assert!(fit.lambda.is_infinite());
}
