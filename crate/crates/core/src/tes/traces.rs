use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{Result, TesError};
use crate::rng::{Stage, Substreams};

/// Detector voltage traces, one row per pulse, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    data: Vec<f32>,
    num_pulses: usize,
    num_samples: usize,
    /// Seconds between samples.
    pub sample_period: f64,
}

/// Fewest samples a trace may have.
pub const MIN_SAMPLES: usize = 8;

impl TraceSet {
    pub fn new(data: Vec<f32>, num_pulses: usize, num_samples: usize, sample_period: f64) -> Result<Self> {
        if num_samples < MIN_SAMPLES {
            return Err(TesError::Domain(format!(
                "traces need at least {MIN_SAMPLES} samples, got {num_samples}"
            )));
        }
        if data.len() != num_pulses * num_samples {
            return Err(TesError::Domain(format!(
                "{} values do not form {num_pulses} x {num_samples} traces",
                data.len()
            )));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(TesError::Domain(format!("sample period {sample_period} must be > 0")));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(TesError::Domain(format!(
                "non-finite sample in trace {} at index {}",
                i / num_samples,
                i % num_samples
            )));
        }
        Ok(Self {
            data,
            num_pulses,
            num_samples,
            sample_period,
        })
    }

    pub fn num_pulses(&self) -> usize {
        self.num_pulses
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.num_samples..(i + 1) * self.num_samples]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.num_samples)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Multiply every sample by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Rows reordered so that row `k` of the result is row `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            num_pulses: order.len(),
            ..self.clone()
        }
    }
}

/// Forward model of the detector response.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTemplate {
    /// Normalised so the maximum is 1.
    pub shape: Vec<f64>,
    /// Volts at the shape peak for one photon.
    pub per_photon_gain: f64,
    /// Additive white noise per sample, volts.
    pub noise_sigma: f64,
    /// Each extra photon adds this factor times the previous photon's height; 1 is linear.
    pub nonlinearity: f64,
}

impl PulseTemplate {
    pub fn new(shape: Vec<f64>, per_photon_gain: f64, noise_sigma: f64, nonlinearity: f64) -> Result<Self> {
        if shape.len() < MIN_SAMPLES {
            return Err(TesError::Domain(format!("template needs at least {MIN_SAMPLES} samples")));
        }
        let peak = shape.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(TesError::Domain("template shape must have a positive peak".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(TesError::Domain(format!("noise sigma {noise_sigma} must be >= 0")));
        }
        if !(per_photon_gain > 0.0 && per_photon_gain.is_finite()) {
            return Err(TesError::Domain(format!("per-photon gain {per_photon_gain} must be > 0")));
        }
        if !(nonlinearity > 0.0 && nonlinearity <= 1.0) {
            return Err(TesError::Domain(format!("nonlinearity {nonlinearity} must lie in (0, 1]")));
        }
        Ok(Self {
            shape: shape.iter().map(|v| v / peak).collect(),
            per_photon_gain,
            noise_sigma,
            nonlinearity,
        })
    }

    /// Double-exponential calorimeter pulse `e^{−t/τ_fall} − e^{−t/τ_rise}` sampled
    /// at `t = k·sample_period`.
    pub fn tes_shape(num_samples: usize, sample_period: f64, rise_time: f64, fall_time: f64) -> Vec<f64> {
        (0..num_samples)
            .map(|k| {
                let t = k as f64 * sample_period;
                (-t / fall_time).exp() - (-t / rise_time).exp()
            })
            .collect()
    }

    /// Template whose adjacent photon classes sit `separation` score-noise
    /// standard deviations apart under a matched projection.
    pub fn with_separation(shape: Vec<f64>, separation: f64, noise_sigma: f64) -> Result<Self> {
        let peak = shape.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm = shape.iter().map(|v| (v / peak).powi(2)).sum::<f64>().sqrt();
        Self::new(shape, separation * noise_sigma / norm, noise_sigma, 1.0)
    }

    /// Adjacent-class spacing in units of the projected noise, `gain·‖shape‖/σ`.
    pub fn class_separation(&self) -> f64 {
        let norm = self.shape.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.per_photon_gain * norm / self.noise_sigma
    }

    /// Pulse height in units of the single-photon gain for `n` photons.
    pub fn response(&self, n: u32) -> f64 {
        if self.nonlinearity == 1.0 {
            n as f64
        } else {
            (1.0 - self.nonlinearity.powi(n as i32)) / (1.0 - self.nonlinearity)
        }
    }
}

/// Synthesize one trace per photon number: `gain·f(n)·shape + N(0, σ²)` per sample.
pub fn generate_traces(counts: &[u32], template: &PulseTemplate, sample_period: f64, seed: u64) -> Result<TraceSet> {
    let ns = template.shape.len();
    let streams = Substreams::new(seed);
    let noise = (template.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, template.noise_sigma).expect("validated sigma"));
    let mut data = vec![0f32; counts.len() * ns];
    data.par_chunks_mut(ns).zip(counts.par_iter()).enumerate().for_each(|(i, (row, &n))| {
        let height = template.per_photon_gain * template.response(n);
        let mut rng = streams.stream(i as u64, Stage::TraceNoise);
        for (out, s) in row.iter_mut().zip(&template.shape) {
            let e = noise.map_or(0.0, |d| d.sample(&mut rng));
            *out = (height * s + e) as f32;
        }
    });
    TraceSet::new(data, counts.len(), ns, sample_period)
}
