//! Below-threshold squeezed light from a microring resonator: quadrature
//! spectra, photon-number statistics of the generated pairs, TES trace
//! classification and the fits that tie measurements back to the model.

// `!(a < b)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimation;
pub mod photon_stats;
pub mod ring_model;
pub mod rng;
pub mod tes;

pub use estimation::{FitConfig, FitError, FitResult};
pub use photon_stats::{Arm, CountSet, PulseCount, SchmidtSpectrum, StatsError};
pub use ring_model::{DetuningMode, PumpDrive, RingError, RingParams, SpectrumPoint};
pub use tes::{GaussianMixture, PulseTemplate, ScoreHistogram, TesError, TraceSet};
