mod common;

use cvphase::measurements::heterodyne_family;
use cvphase::phase_space::{Party, PhaseGrid};
use cvphase::steering::{
    default_party_grid, lhs_reconstruction_check, reid_product, verify_variance_chain, QuadratureAxis,
    SteeringGrid,
};
use nalgebra::DVector;
use proptest::prelude::*;

use common::{gaussian_state, mild_gaussian_state};

fn axis(party: Party) -> impl Strategy<Value = QuadratureAxis> {
    (0.0..std::f64::consts::TAU).prop_map(move |a| QuadratureAxis::new(party, &[a.cos(), a.sin()]).unwrap())
}

fn quad(v: &nalgebra::DMatrix<f64>, a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (DVector::from_column_slice(a).transpose() * v * DVector::from_column_slice(b))[(0, 0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn chain_holds_for_gaussians(state in gaussian_state(), g in axis(Party::Alice), f in axis(Party::Bob)) {
        let report = verify_variance_chain(&state, &g, &f, &SteeringGrid::default()).unwrap();
        prop_assert!(report.var_q_cond >= report.var_c_q - report.tolerance);
        prop_assert!(report.var_p_cond >= report.var_c_p - report.tolerance);
        if report.flag {
            prop_assert!(report.witness_point.is_some());
        }
    }

    #[test]
    fn gaussian_variances_match_closed_forms(state in mild_gaussian_state(), g in axis(Party::Alice), f in axis(Party::Bob)) {
        let report = verify_variance_chain(&state, &g, &f, &SteeringGrid::default()).unwrap();
        let (va, vb, vab) = (state.alice_block(), state.bob_block(), state.cross_block());
        let schur = cvphase::gaussian::schur_complement(&state).unwrap();
        let homodyne = |ga: [f64; 2], fb: [f64; 2]| {
            quad(&vb, &fb, &fb) - quad(&vab, &ga, &fb).powi(2) / quad(&va, &ga, &ga)
        };
        let checks = [
            (report.var_q_cond, homodyne(g.q_direction(), f.q_direction())),
            (report.var_p_cond, homodyne(g.p_direction(), f.p_direction())),
            (report.var_c_q, quad(&schur, &f.q_direction(), &f.q_direction())),
            (report.var_c_p, quad(&schur, &f.p_direction(), &f.p_direction())),
        ];
        for (got, expected) in checks {
            prop_assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        }
    }

    #[test]
    fn reid_flag_implies_a_witness_point(state in gaussian_state(), g in axis(Party::Alice), f in axis(Party::Bob)) {
        let grid = SteeringGrid::default();
        if reid_product(&state, &g, &f, &grid).unwrap().steering {
            prop_assert!(verify_variance_chain(&state, &g, &f, &grid).unwrap().witness_point.is_some());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn heterodyne_assemblages_have_hidden_states(state in mild_gaussian_state()) {
        let family = heterodyne_family(PhaseGrid::centered(2, 4.0, 16).unwrap()).unwrap();
        let ag = default_party_grid(&state, Party::Alice, 32).unwrap();
        let bg = default_party_grid(&state, Party::Bob, 32).unwrap();
        let check = lhs_reconstruction_check(&state, &family, &ag, &bg).unwrap();
        prop_assert!(check.max_discrepancy < 1e-6);
    }
}
