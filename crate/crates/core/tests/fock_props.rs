use cvphase::fock::{find_negative_fock, mixture_reduced_alice, thermal_weights, verify_fock_recurrence};
use proptest::prelude::*;

fn disc(radius: f64) -> impl Strategy<Value = Vec<f64>> {
    (0.0..radius, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| vec![r * a.cos(), r * a.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn recurrence_holds(m in 1usize..=30, x in disc(6.0)) {
        prop_assert!(verify_fock_recurrence(m, &x).unwrap() < 1e-10);
    }

    #[test]
    fn negative_level_is_found_early(x in disc(6.0)) {
        let u: f64 = x.iter().map(|c| c * c).sum();
        let bound = (u / 2.0).ceil() as usize + 2;
        prop_assert!(find_negative_fock(&x, 200).unwrap() <= bound);
    }

    #[test]
    fn thermal_reduced_state_is_thermal(t in 0.05..2.0f64, x in disc(6.0)) {
        let mix = thermal_weights(t, 120).unwrap();
        let v = 2.0 * t + 1.0;
        let u: f64 = x.iter().map(|c| c * c).sum();
        let expected = (-u / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v);
        let got = mixture_reduced_alice(&mix, &x).unwrap();
        prop_assert!(got > 0.0);
        prop_assert!((got - expected).abs() <= 1e-6 * expected);
    }
}
