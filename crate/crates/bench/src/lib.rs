//! Shared fixtures for the criterion benches in `benches/`.

use std::f64::consts::PI;

use sqz_core::estimation::{synthesize_samples, SpectrumSample};
use sqz_core::photon_stats::sample_counts;
use sqz_core::ring_model::{lambda_coeff, log_spaced};
use sqz_core::tes::generate_traces;
use sqz_core::{Arm, DetuningMode, PulseTemplate, PumpDrive, RingParams, SchmidtSpectrum, TraceSet};

pub const SAMPLE_PERIOD: f64 = 1e-8;

/// 1550 nm ring with 500 MHz dissipation driven at g = 0.45.
pub fn ring() -> (RingParams, PumpDrive) {
    let omega = 1.216e15;
    let params = RingParams::symmetric(omega / (2.0 * 2.0 * PI * 500e6), omega, 0.5, 0.514).unwrap();
    let drive = PumpDrive::for_gain(0.45, lambda_coeff(&params).unwrap(), &params, DetuningMode::LockedShifted).unwrap();
    (params, drive)
}

pub fn sideband_grid(points: usize) -> Vec<f64> {
    log_spaced(2.0 * PI * 20e6, 2.0 * PI * 1e9, points).unwrap()
}

pub fn spectrum_samples(points: usize, seed: u64) -> Vec<SpectrumSample> {
    let (params, drive) = ring();
    let spectrum = sqz_core::ring_model::squeezing_spectrum(&params, &drive, &sideband_grid(points)).unwrap();
    synthesize_samples(&spectrum, 0.1, seed).unwrap()
}

pub fn pair_source() -> SchmidtSpectrum {
    SchmidtSpectrum::single_mode(0.5, 0.8, 0.8).unwrap()
}

pub fn template() -> PulseTemplate {
    PulseTemplate::with_separation(PulseTemplate::tes_shape(64, SAMPLE_PERIOD, 5e-8, 2e-7), 7.0, 1e-4).unwrap()
}

/// Synthetic signal-arm traces for `pulses` pulses.
pub fn traces(pulses: usize, seed: u64) -> TraceSet {
    let counts = sample_counts(&pair_source(), pulses, seed).unwrap().column(Arm::Signal);
    generate_traces(&counts, &template(), SAMPLE_PERIOD, seed).unwrap()
}
