use std::f64::consts::PI;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sqz_core::estimation::{
    fit_spectrum, numeric_jacobian, ordinary_least_squares, synthesize_samples, LeastSquares, SpectrumModel,
    SpectrumProblem, SpectrumSample,
};
use sqz_core::ring_model::{lambda_coeff, log_spaced, squeezing_spectrum};
use sqz_core::{DetuningMode, FitConfig, PumpDrive, RingParams};

const OMEGA: f64 = 1.216e15;
const GAMMA: f64 = 2.0 * PI * 500e6;

fn samples(g: f64, eta: f64, points: usize, noise_db: f64, seed: u64) -> Vec<SpectrumSample> {
    let p = RingParams::symmetric(OMEGA / (2.0 * GAMMA), OMEGA, eta, 1.0).unwrap();
    let d = PumpDrive::for_gain(g, lambda_coeff(&p).unwrap(), &p, DetuningMode::LockedShifted).unwrap();
    let grid = log_spaced(2.0 * PI * 20e6, 2.0 * PI * 1e9, points).unwrap();
    synthesize_samples(&squeezing_spectrum(&p, &d, &grid).unwrap(), noise_db, seed).unwrap()
}

fn model() -> impl Strategy<Value = SpectrumModel> {
    prop_oneof![
        Just(SpectrumModel::LockedShifted),
        Just(SpectrumModel::LockedZero),
        Just(SpectrumModel::FreeDetuning),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn analytic_jacobian_matches_finite_differences(
        m in model(), g in 0.05f64..0.9, eta in 0.05f64..0.95, gamma_scale in 0.3f64..3.0, ratio in -1.0f64..1.0,
    ) {
        let data = samples(0.45, 0.26, 30, 0.1, 1);
        let problem = SpectrumProblem::new(&data, m);
        let mut physical = vec![g, eta, gamma_scale * GAMMA];
        if m == SpectrumModel::FreeDetuning {
            physical.push(ratio * ratio);
        }
        let p = problem.to_internal(&physical);
        let analytic = problem.jacobian(&p).unwrap();
        let numeric = numeric_jacobian(|q| problem.residuals(q), &p).unwrap();
        let err = (analytic - &numeric).amax() / numeric.amax();
        prop_assert!(err < 1e-6, "relative jacobian error {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn spectral_fit_ignores_sample_order(g in 0.2f64..0.8, eta in 0.1f64..0.9, seed in any::<u64>()) {
        let data = samples(g, eta, 40, 0.1, seed);
        let mut shuffled = data.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let cfg = FitConfig::default();
        let a = fit_spectrum(&data, SpectrumModel::LockedShifted, &cfg).unwrap();
        let b = fit_spectrum(&shuffled, SpectrumModel::LockedShifted, &cfg).unwrap();
        prop_assert!(a.converged && b.converged);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs(), "{x} vs {y}");
        }
        prop_assert!(a.std_errors.iter().all(|e| e.is_finite() && *e >= 0.0));
    }
}

#[test]
fn spectral_standard_errors_shrink_with_point_count() {
    let cfg = FitConfig::default();
    let mean_error = |points| {
        (0..20)
            .map(|seed| {
                let fit = fit_spectrum(&samples(0.45, 0.26, points, 0.1, seed), SpectrumModel::LockedShifted, &cfg).unwrap();
                fit.std_error("gain").unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    let ratio = mean_error(40) / mean_error(160);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "error ratio {ratio}, expected 2");
}

#[test]
fn line_standard_errors_shrink_with_point_count() {
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut slope_error = |n: usize| {
        let x: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0 + noise.sample(&mut rng)).collect();
        ordinary_least_squares(&x, &y).unwrap().slope_std_error
    };
    let ratio = slope_error(200) / slope_error(800);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "error ratio {ratio}, expected 2");
}

#[test]
fn free_detuning_fit_converges_across_noise_draws() {
    let cfg = FitConfig::default();
    for seed in 0..40 {
        let fit = fit_spectrum(&samples(0.45, 0.26, 50, 0.1, seed), SpectrumModel::FreeDetuning, &cfg)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(fit.converged);
        assert!((fit.value("eta").unwrap() - 0.26).abs() < 0.05, "seed {seed}: {:?}", fit.values);
    }
}
