use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use su11_core::interferometer::{s_amplitude, InterferometerConfig, DARK_FRINGE_DETECTOR_NOISE};

fn config() -> impl Strategy<Value = InterferometerConfig> {
    (0.0..3.0f64, 0.0..3.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.5..=1.0f64, 0.0..1500.0f64)
        .prop_map(|(r1, r2, mu, eta, nu, v, dn)| InterferometerConfig::new(r1, r2, mu, eta, nu, v, dn).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pipeline_matches_closed_form(cfg in config(), phi in -PI..PI) {
        let closed = cfg.mean_output_closed(phi);
        let pipeline = cfg.output_state(phi).photon_mean();
        prop_assert!((pipeline - closed).abs() <= 1e-9 * closed.max(1.0), "{} vs {}", pipeline, closed);
    }

    #[test]
    fn closed_form_is_pi_periodic(cfg in config(), phi in -PI..PI) {
        let a = cfg.mean_output_closed(phi);
        let b = cfg.mean_output_closed(phi + PI);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn lossless_closed_form_is_s_norm(r1 in 0.0..3.0f64, r2 in 0.0..3.0f64, phi in -PI..PI) {
        let cfg = InterferometerConfig::ideal(r1, r2).unwrap();
        let s2 = s_amplitude(r1, r2, phi).norm_sqr();
        prop_assert!((cfg.mean_output_closed(phi) - s2).abs() <= 1e-9 * s2.max(1.0));
    }

    #[test]
    fn slope_matches_finite_difference(cfg in config(), phi in 0.05..1.5f64) {
        let h = 1e-5;
        let fd = (cfg.mean_output_closed(phi + h) - cfg.mean_output_closed(phi - h)) / (2.0 * h);
        let an = cfg.mean_slope(phi);
        let scale = cfg.fringe_amplitude().max(1e-6);
        prop_assert!((fd - an).abs() <= 1e-6 * scale, "{} vs {}", fd, an);
    }

    #[test]
    fn noise_never_below_detector_floor(cfg in config(), phi in -PI..PI) {
        prop_assert!(cfg.output_noise(phi) >= cfg.detector_noise * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sensitivity_improves_with_detection_efficiency(
        r1 in 0.5..2.5f64,
        r2 in 0.5..5.0f64,
        n_inside in 0.5..5.0f64,
        lo in 0.05..0.95f64,
    ) {
        prop_assume!(n_inside / r1.sinh().powi(2) <= 1.0);
        let base = InterferometerConfig::from_n_inside(r1, r2, 0.97, lo, n_inside, 0.97, DARK_FRINGE_DETECTOR_NOISE).unwrap();
        let better = base.with_eta((lo + 0.05).min(1.0)).unwrap();
        let a = base.min_sensitivity_with_grid(256).delta_phi_min;
        let b = better.min_sensitivity_with_grid(256).delta_phi_min;
        prop_assert!(b <= a * (1.0 + 1e-9), "{} -> {}", a, b);
    }
}

#[test]
fn minimum_sits_near_dark_fringe_for_red_configuration() {
    let cfg = InterferometerConfig::from_n_inside(2.1, 5.2, 0.97, 0.77, 4.5, 0.97, DARK_FRINGE_DETECTOR_NOISE).unwrap();
    let best = cfg.min_sensitivity();
    assert!(best.phi_opt > 0.0 && best.phi_opt < FRAC_PI_2 / 4.0);
    assert!(cfg.sensitivity(best.phi_opt) <= cfg.sensitivity(0.3));
}
