use std::f64::consts::PI;

use mzweak_core::jones::{hwp, weak_value, JonesMatrix, JonesVector};
use mzweak_core::weakmeas::{
    centroid_exact, centroid_numeric, expectation_of_a_via_weakmeas, inferred_weak_value, momentum_centroid,
    pointer_after_postselection, postselection_probability_numeric, WeakMeasConfig, WEAK_A_OVER_SIGMA,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn post_selection(theta: f64) -> JonesVector {
    hwp(theta).adjoint().apply(&JonesVector::diagonal())
}

fn sweep_cfg(theta: f64, ratio: f64) -> WeakMeasConfig {
    WeakMeasConfig::with_ratio(JonesVector::diagonal(), post_selection(theta), ratio)
}

/// Trapezoid rule on a σ/16 grid over ±14σ around both Gaussians.
fn trapezoid_moments(cfg: &WeakMeasConfig) -> (f64, f64) {
    let st = pointer_after_postselection(cfg).unwrap();
    let s = cfg.beam_sigma;
    let lo = -14.0 * s;
    let hi = cfg.displacement_a + 14.0 * s;
    let h = s / 16.0;
    let n = ((hi - lo) / h).ceil() as usize;
    let h = (hi - lo) / n as f64;
    let (mut m0, mut m1) = (0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let f = st.density(x);
        m0 += w * f;
        m1 += w * x * f;
    }
    (m0 * h, m1 * h)
}

fn ratio_grid() -> Vec<f64> {
    // 20 log-spaced a/σ values from 0.01 to 3.
    (0..20).map(|i| 0.01 * (300f64).powf(i as f64 / 19.0)).collect()
}

fn theta_grid() -> Vec<f64> {
    (0..50).map(|i| i as f64 * PI / 50.0).collect()
}

#[test]
fn closed_form_centroid_matches_quadrature_on_grid() {
    for theta in theta_grid() {
        for ratio in ratio_grid() {
            let cfg = sweep_cfg(theta, ratio);
            let exact = centroid_exact(&cfg).unwrap();
            let numeric = centroid_numeric(&cfg).unwrap();
            let (m0, m1) = trapezoid_moments(&cfg);
            let a = cfg.displacement_a;
            assert!((exact - numeric).abs() <= 1e-9 * a, "θ {theta} a/σ {ratio}: {exact} vs {numeric}");
            assert!((exact - m1 / m0).abs() <= 1e-9 * a, "θ {theta} a/σ {ratio}: {exact} vs trapezoid {}", m1 / m0);
        }
    }
}

#[test]
fn postselection_probability_matches_quadrature() {
    for theta in theta_grid().into_iter().step_by(5) {
        for ratio in ratio_grid().into_iter().step_by(4) {
            let cfg = sweep_cfg(theta, ratio);
            let st = pointer_after_postselection(&cfg).unwrap();
            let (m0, _) = trapezoid_moments(&cfg);
            assert!((st.norm - m0).abs() <= 1e-12);
            assert!((postselection_probability_numeric(&cfg).unwrap() - m0).abs() <= 1e-12);
        }
    }
}

#[test]
fn orthogonal_centroid_is_half_displacement() {
    let psi = JonesVector::diagonal();
    let phi = JonesVector::antidiagonal();
    for (a, sigma) in [(0.1, 1.0), (5.0, 500.0), (1000.0, 500.0), (3.0, 0.2)] {
        let cfg = WeakMeasConfig { displacement_a: a, beam_sigma: sigma, ..WeakMeasConfig::with_ratio(psi, phi, 1.0) };
        assert_eq!(centroid_exact(&cfg).unwrap(), 0.5 * a);
    }
}

/// Re⟨Π_V⟩_w straight from the state vectors.
fn eq2_real(theta: f64) -> f64 {
    weak_value(&JonesMatrix::proj_v(), &JonesVector::diagonal(), &post_selection(theta)).unwrap().re
}

#[test]
fn weak_limit_error_is_quadratic() {
    for theta in [30f64.to_radians(), 60f64.to_radians(), 100f64.to_radians()] {
        let target = eq2_real(theta);
        let err = |r: f64| (inferred_weak_value(&sweep_cfg(theta, r)).unwrap().centroid_over_a - target).abs();
        for r in [0.2, 0.1, 0.05] {
            let ratio = err(r) / err(r / 2.0);
            assert!(ratio >= 3.5, "θ {theta}, a/σ {r}: reduction {ratio}");
        }
    }
}

#[test]
fn weak_sweep_matches_weak_value() {
    for deg in (0..180).step_by(2) {
        let theta = (deg as f64).to_radians();
        if (2.0 * theta).sin().abs() <= 0.1 {
            continue;
        }
        let est = inferred_weak_value(&sweep_cfg(theta, WEAK_A_OVER_SIGMA)).unwrap();
        let exact_h = 1.0 - eq2_real(theta);
        assert!((est.weak_value_h_re - exact_h).abs() <= 0.01 * exact_h.abs().max(1e-12), "θ {deg}°: {} vs {exact_h}", est.weak_value_h_re);
    }
}

#[test]
fn thirty_degrees_expectation() {
    let template = sweep_cfg(0.0, WEAK_A_OVER_SIGMA);
    let rows = expectation_of_a_via_weakmeas(&[30f64.to_radians()], &template).unwrap();
    let expected = (60f64.to_radians().cos() + 60f64.to_radians().sin()) / 2.0;
    assert!((rows[0].expectation_inferred / expected - 1.0).abs() < 0.02);
}

#[test]
fn momentum_shift_tracks_imaginary_weak_value() {
    let psi = JonesVector::diagonal();
    for phi in [JonesVector::circular_right(), JonesVector::circular_left(), JonesVector::new(Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6))] {
        let cfg = WeakMeasConfig::with_ratio(psi, phi, WEAK_A_OVER_SIGMA);
        let wv = weak_value(&JonesMatrix::proj_v(), &psi, &phi).unwrap();
        let p = momentum_centroid(&cfg).unwrap();
        let expected = cfg.displacement_a * wv.im / (2.0 * cfg.beam_sigma.powi(2));
        assert!(expected.abs() > 0.0);
        assert!((p / expected - 1.0).abs() < 0.01, "{p} vs {expected}");

        // Finite-a closed form as an independent check on the quadrature.
        let st = pointer_after_postselection(&cfg).unwrap();
        let w = st.c_undisplaced.conj() * st.c_displaced;
        let closed = cfg.displacement_a / (2.0 * cfg.beam_sigma.powi(2)) * w.im * st.gaussian_overlap() / st.norm;
        assert!((p - closed).abs() <= 1e-9 * closed.abs());
    }
}

proptest! {
    #[test]
    fn complementarity_is_exact(theta in 0.0f64..PI, ratio in 0.001f64..5.0) {
        let est = inferred_weak_value(&sweep_cfg(theta, ratio)).unwrap();
        // Both come from one centroid; the sum is 1 up to the rounding of 1 − x.
        let sum = est.weak_value_h_re + est.weak_value_v_re;
        prop_assert!((sum - 1.0).abs() <= 2.0 * f64::EPSILON * est.weak_value_v_re.abs().max(1.0));
    }

    #[test]
    fn real_states_give_zero_momentum(theta in 0.0f64..PI, ratio in 0.001f64..3.0) {
        let cfg = sweep_cfg(theta, ratio);
        prop_assert!(momentum_centroid(&cfg).unwrap().abs() <= 1e-12 / cfg.beam_sigma);
    }
}
