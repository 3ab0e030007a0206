mod common;

use cvphase::conditional::{
    certify_unphysical, conditional_quasi_probability, conditional_wigner, remote_conditioned_state,
    witness_expectation, JointWigner, PartyWigner, WitnessConfig, WitnessOperator,
};
use cvphase::fock::thermal_weights;
use cvphase::gaussian::make_product;
use cvphase::phase_space::{axis_labels, Party, PhaseGrid, WignerField};
use nalgebra::DMatrix;
use proptest::prelude::*;

use common::{gaussian_state, point2};

/// Single-mode thermal-like covariance `R diag(ν e^{2s}, ν e^{-2s}) Rᵀ`, `ν ≥ 1`.
fn one_mode_covariance() -> impl Strategy<Value = DMatrix<f64>> {
    (1.0..2.0f64, -0.4..0.4f64, 0.0..std::f64::consts::PI).prop_map(|(nu, s, th)| {
        let (c, si) = (th.cos(), th.sin());
        let r = DMatrix::from_row_slice(2, 2, &[c, -si, si, c]);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![nu * (2.0 * s).exp(), nu * (-2.0 * s).exp()]));
        &r * d * r.transpose()
    })
}

fn fock_field(grid: &PhaseGrid, level: usize) -> WignerField {
    let labels = axis_labels(Party::Bob, 1);
    WignerField::from_fn(grid.clone(), labels, |x| cvphase::fock::fock_wigner(level, x).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gaussian_conditionals_are_normalised(state in gaussian_state(), x_a in point2(2.0)) {
        let cond = conditional_wigner(&state, &x_a).unwrap();
        let field = cond.to_field(&cond.default_grid(128).unwrap(), Party::Bob).unwrap();
        prop_assert!((field.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fock_series_conditionals_are_normalised(t in 0.2..1.5f64, x_a in point2(2.5)) {
        let mix = thermal_weights(t, 20).unwrap();
        let cond = conditional_wigner(&mix, &x_a).unwrap();
        let grid = PhaseGrid::centered(2, 12.0, 128).unwrap();
        let field = cond.to_field(&grid, Party::Bob).unwrap();
        prop_assert!((field.integrate() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn signed_weights_match_quadrature(t in 0.2..1.5f64, x_a in point2(2.5), level in 0usize..6) {
        let mix = thermal_weights(t, 20).unwrap();
        let cond = conditional_wigner(&mix, &x_a).unwrap();
        let PartyWigner::FockSeries { weights, .. } = &cond else { unreachable!() };
        let grid = PhaseGrid::centered(2, 12.0, 128).unwrap();
        let field = cond.to_field(&grid, Party::Bob).unwrap();
        let quadrature = field.pair(&fock_field(&grid, level)).unwrap();
        prop_assert!((quadrature - weights[level]).abs() < 1e-6);
    }

    #[test]
    fn fock_successes_sum_to_one(t in 0.2..1.5f64) {
        let mix = thermal_weights(t, 60).unwrap();
        let bob = mix.bob_reduced();
        let config = WitnessConfig::fock_only(60);
        let total: f64 = (0..=60)
            .map(|m| witness_expectation(&bob, &WitnessOperator::fock(m), &config).unwrap().value)
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn certificate_implies_heralded_negativity(t in 0.2..1.5f64, x_a in point2(3.0)) {
        let mix = thermal_weights(t, 30).unwrap();
        let config = WitnessConfig::fock_only(30);
        let Some(cert) = certify_unphysical(&mix, &x_a, &config).unwrap() else {
            return Err(TestCaseError::fail("thermal mixtures are certified everywhere"));
        };
        prop_assert!(conditional_quasi_probability(&mix, &cert.witness, &x_a, &config).unwrap() < 0.0);
        let grid = PhaseGrid::new(x_a.clone(), 1.0, 16).unwrap();
        let remote = remote_conditioned_state(&mix, &cert.witness, &grid, &config).unwrap();
        let node = grid.nearest_node(&x_a).unwrap();
        prop_assert!(remote.alice.values()[node] < 0.0);
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn gaussian_fock_successes_sum_to_one(r in 0.0..0.5f64) {
        let state = cvphase::gaussian::make_tmsv(r).unwrap();
        let bob = state.bob_reduced();
        let config = WitnessConfig { quadrature_points: 64, ..WitnessConfig::default() };
        let total: f64 = (0..=40)
            .map(|m| witness_expectation(&bob, &WitnessOperator::fock(m), &config).unwrap().value)
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn remote_states_integrate_to_one(state in gaussian_state(), level in 0usize..2) {
        let config = WitnessConfig { quadrature_points: 64, ..WitnessConfig::default() };
        let herald = WitnessOperator::fock(level);
        let grid = cvphase::conditional::default_alice_grid(&state, 48).unwrap();
        match remote_conditioned_state(&state, &herald, &grid, &config) {
            Ok(remote) => prop_assert!((remote.alice.integrate() - 1.0).abs() < 1e-6),
            Err(cvphase::Error::HeraldImpossible(_)) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn product_states_have_no_certificates(
        va in one_mode_covariance(),
        vb in one_mode_covariance(),
        x_a in point2(3.0),
        level in 0usize..3,
    ) {
        let state = make_product(&va, &vb).unwrap();
        let config = WitnessConfig { quadrature_points: 64, ..WitnessConfig::default() };
        prop_assert!(certify_unphysical(&state, &x_a, &config).unwrap().is_none());
        let grid = cvphase::conditional::default_alice_grid(&state, 16).unwrap();
        let remote = remote_conditioned_state(&state, &WitnessOperator::fock(level), &grid, &config).unwrap();
        prop_assert!(remote.alice.min_value().0 >= -1e-9);
    }
}

#[test]
fn joint_trait_objects_share_the_layout() {
    let mix = thermal_weights(1.0, 10).unwrap();
    let joint: &dyn JointWigner = &mix;
    assert_eq!(joint.layout().dim(), 4);
}
