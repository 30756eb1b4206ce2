//! Closed-form power against simulation and the algebraic identities between calculators.

use nidid::nicompare::{ni_test, Sided};
use nidid::power::{detection_power, empirical_power, mde, ni_power, two_sample_se};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const Z95: f64 = 1.644_853_626_951_472_2;
const Z975: f64 = 1.959_963_984_540_054;

/// Share of `reps` estimates `theta + se * e` for which `reject` holds.
fn simulated_rate(seed: u64, reps: usize, theta: f64, se: f64, reject: impl Fn(f64) -> bool) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..reps)
        .filter(|_| reject(theta + se * rng.sample::<f64, _>(StandardNormal)))
        .count() as f64
        / reps as f64
}

#[test]
fn closed_form_power_matches_replicate_z_tests() {
    let (n, sigma, reps) = (1000.0, 1.0, 20_000);
    let se = sigma / f64::sqrt(n);
    for (i, &theta) in [0.0, 0.03, 0.06, 0.1].iter().enumerate() {
        let seed = 50 + i as u64;
        let one = simulated_rate(seed, reps, theta, se, |est| est / se > Z95);
        let two = simulated_rate(seed, reps, theta, se, |est| (est / se).abs() > Z975);
        assert!((one - detection_power(theta, se, 0.05, Sided::One).unwrap()).abs() < 0.01);
        assert!((two - detection_power(theta, se, 0.05, Sided::Two).unwrap()).abs() < 0.01);

        let delta = 0.08;
        let ni_one = simulated_rate(seed + 10, reps, theta, se, |est| est + Z95 * se < delta);
        let ni_two = simulated_rate(seed + 10, reps, theta, se, |est| {
            est + Z975 * se < delta && est - Z975 * se > -delta
        });
        assert!((ni_one - ni_power(delta, theta, se, 0.05, Sided::One).unwrap()).abs() < 0.01);
        assert!((ni_two - ni_power(delta, theta, se, 0.05, Sided::Two).unwrap()).abs() < 0.01);
    }
}

#[test]
fn observed_power_is_one_half_at_the_level() {
    for alpha in [0.01, 0.05, 0.1] {
        assert!((empirical_power(alpha, alpha).unwrap().power - 0.5).abs() < 1e-12);
    }
}

#[test]
fn two_sample_standard_error() {
    let se = two_sample_se(2.0, 16.0, 3.0, 9.0).unwrap();
    assert!((se - f64::sqrt(0.25 + 1.0)).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mde_round_trips_through_ni_power(n in 2.0f64..5000.0, sigma in 0.01f64..20.0, power in 0.06f64..0.99) {
        let d = mde(n, sigma, 0.05, power, Sided::One).unwrap();
        let back = ni_power(d, 0.0, sigma / n.sqrt(), 0.05, Sided::One).unwrap();
        prop_assert!((back - power).abs() < 1e-9);
        let back = detection_power(d, sigma / n.sqrt(), 0.05, Sided::One).unwrap();
        prop_assert!((back - power).abs() < 1e-9);
    }

    #[test]
    fn power_is_monotone(delta in 0.01f64..3.0, step in 0.001f64..1.0, theta in -1.0f64..1.0, se in 0.05f64..2.0) {
        for sided in [Sided::One, Sided::Two] {
            let base = ni_power(delta, theta, se, 0.05, sided).unwrap();
            prop_assert!(ni_power(delta + step, theta, se, 0.05, sided).unwrap() >= base - 1e-15);
            let a = detection_power(theta.abs(), se, 0.05, sided).unwrap();
            let b = detection_power(theta.abs() + step, se, 0.05, sided).unwrap();
            prop_assert!(b >= a - 1e-15);
        }
        let lower = ni_power(delta, theta + step, se, 0.05, Sided::One).unwrap();
        prop_assert!(lower <= ni_power(delta, theta, se, 0.05, Sided::One).unwrap() + 1e-15);
        let one = ni_power(delta, theta, se, 0.05, Sided::One).unwrap();
        let two = ni_power(delta, theta, se, 0.05, Sided::Two).unwrap();
        prop_assert!(two <= one + 1e-15);
        let mirrored = ni_power(delta, -theta, se, 0.05, Sided::Two).unwrap();
        prop_assert!((two - mirrored).abs() < 1e-12);
    }

    #[test]
    fn ni_test_p_value_orders_kappa_and_delta(kappa in -3.0f64..3.0, step in 0.001f64..1.0, delta in 0.1f64..3.0, se in 0.05f64..2.0) {
        let p = ni_test(kappa, se, delta, 0.05, Sided::One).unwrap().p_value;
        prop_assert!(ni_test(kappa + step, se, delta, 0.05, Sided::One).unwrap().p_value > p || p < 1e-15 || p > 1.0 - 1e-12);
        prop_assert!(ni_test(kappa, se, delta + step, 0.05, Sided::One).unwrap().p_value < p || p < 1e-15 || p > 1.0 - 1e-12);
        let a = ni_test(kappa, se, delta, 0.05, Sided::Two).unwrap();
        let b = ni_test(-kappa, se, delta, 0.05, Sided::Two).unwrap();
        prop_assert_eq!(a.reject_h0, b.reject_h0);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
    }
}
