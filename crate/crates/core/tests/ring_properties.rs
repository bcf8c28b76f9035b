use std::f64::consts::PI;

use proptest::prelude::*;
use sqz_core::ring_model::{
    extremal_variances, lambda_coeff, moment_spectrum, phase_extremal_variances, quadrature_variance, to_db,
};
use sqz_core::{DetuningMode, PumpDrive, RingParams};

const OMEGA: f64 = 1.216e15;
const GAMMA: f64 = 2.0 * PI * 500e6;

fn ring(escape: f64, downstream: f64) -> RingParams {
    RingParams::symmetric(OMEGA / (2.0 * GAMMA), OMEGA, escape, downstream).unwrap()
}

fn drive(p: &RingParams, g: f64, mode: DetuningMode) -> PumpDrive {
    PumpDrive::for_gain(g, lambda_coeff(p).unwrap(), p, mode).unwrap()
}

fn mode() -> impl Strategy<Value = (DetuningMode, f64)> {
    // (mode, largest gain kept clear of the Δ = 0 threshold)
    prop_oneof![
        Just((DetuningMode::LockedZero, 0.97)),
        Just((DetuningMode::LockedShifted, 3.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phase_enters_only_as_a_sum(
        g in 0.01f64..0.9, eta in 0.05f64..1.0, x in 0.0f64..3.0,
        phi_s in -PI..PI, phi_i in -PI..PI, shift in -PI..PI, (m, _) in mode(),
    ) {
        let p = ring(eta, 1.0);
        let d = drive(&p, g, m);
        let a = quadrature_variance(&p, &d, phi_s, phi_i, x * GAMMA).unwrap().variance;
        let b = quadrature_variance(&p, &d, phi_s + shift, phi_i - shift, x * GAMMA).unwrap().variance;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn lossless_output_is_minimum_uncertainty(frac in 0.001f64..1.0, x in 0.0f64..3.0, (m, g_max) in mode()) {
        let p = ring(1.0, 1.0);
        let d = drive(&p, frac * g_max, m);
        let (vp, vm) = phase_extremal_variances(&p, &d, x * GAMMA).unwrap();
        prop_assert!((vp * vm - 1.0).abs() < 1e-10, "V+V- = {}", vp * vm);
    }

    #[test]
    fn extremal_variances_match_moment_assembly(g in 0.0f64..2.0, eta in 0.01f64..1.0) {
        let p = ring(eta, 1.0);
        let (mp, mm) = phase_extremal_variances(&p, &drive(&p, g, DetuningMode::LockedShifted), 0.0).unwrap();
        let (cp, cm) = extremal_variances(g, eta).unwrap();
        prop_assert!(((mp - cp) / cp).abs() < 1e-9);
        prop_assert!(((mm - cm) / cm).abs() < 1e-9);
    }

    #[test]
    fn variances_are_positive_and_bounded_by_loss(
        frac in 0.0f64..1.0, escape in 0.01f64..1.0, down in 0.01f64..1.0, x in 0.0f64..3.0, (m, g_max) in mode(),
    ) {
        let p = ring(escape, down);
        let d = drive(&p, frac * g_max, m);
        let (vp, vm) = phase_extremal_variances(&p, &d, x * GAMMA).unwrap();
        let eta = escape * down;
        prop_assert!(vm > 0.0 && vp >= vm);
        prop_assert!(vm >= 1.0 - eta - 1e-12, "V- = {vm} below 1 - eta = {}", 1.0 - eta);
    }

    #[test]
    fn symmetric_ring_emits_equal_arm_populations(frac in 0.0f64..1.0, x in 0.0f64..3.0, eta in 0.05f64..1.0, (m, g_max) in mode()) {
        let p = ring(eta, 1.0);
        let s = moment_spectrum(&p, &drive(&p, frac * g_max, m), x * GAMMA).unwrap();
        prop_assert!(s.n_signal >= 0.0);
        prop_assert!((s.n_signal - s.n_idler).abs() <= 1e-12 * s.n_signal.max(1e-300));
    }

    #[test]
    fn squeezing_degrades_away_from_resonance(g in 0.02f64..2.0, eta in 0.05f64..1.0) {
        let p = ring(eta, 1.0);
        let d = drive(&p, g, DetuningMode::LockedShifted);
        let mut last = f64::NEG_INFINITY;
        for k in 0..200 {
            let v = to_db(phase_extremal_variances(&p, &d, 0.025 * k as f64 * GAMMA).unwrap().1);
            prop_assert!(v >= last - 1e-12, "V- fell from {last} to {v} at step {k}");
            last = v;
        }
    }

    #[test]
    fn efficiency_deepens_squeezing(g in 0.02f64..2.0, lo in 0.05f64..0.95, x in 0.0f64..2.0) {
        let hi = lo + 0.05;
        let v = |eta| {
            let p = ring(eta, 1.0);
            phase_extremal_variances(&p, &drive(&p, g, DetuningMode::LockedShifted), x * GAMMA).unwrap().1
        };
        prop_assert!(v(hi) < v(lo));
    }

    #[test]
    fn antisqueezing_grows_with_gain(g in 0.0f64..1.9, eta in 0.05f64..1.0, x in 0.0f64..2.0) {
        let p = ring(eta, 1.0);
        let vp = |g| phase_extremal_variances(&p, &drive(&p, g, DetuningMode::LockedShifted), x * GAMMA).unwrap().0;
        prop_assert!(vp(g + 0.05) > vp(g));
    }
}
