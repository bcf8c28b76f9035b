//! Transition-edge-sensor trace analysis: synthetic traces, PCA scoring,
//! histogram mixture fit and photon-number assignment.

pub mod io;
mod mixture;
mod pca;
mod traces;

use thiserror::Error;

use crate::estimation::{FitConfig, FitError};
use crate::photon_stats::{Arm, CountSet, PulseCount};

pub use mixture::{
    assign_numbers, bin_count, boundary_between, fit_mixture, Assignment, GaussianComponent, GaussianMixture,
    ScoreHistogram,
};
pub use pca::{principal_component, project_scores, PrincipalComponent};
pub use traces::{generate_traces, PulseTemplate, TraceSet, MIN_SAMPLES};

#[derive(Debug, Error)]
pub enum TesError {
    #[error("invalid input: {0}")]
    Domain(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("malformed trace file at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("trace file is empty")]
    Empty,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("mixture fit failed: {0}")]
    Fit(FitError),
}

pub type Result<T> = std::result::Result<T, TesError>;

/// Everything the classifier learned from one arm's traces.
#[derive(Debug, Clone)]
pub struct TraceAnalysis {
    pub pca: PrincipalComponent,
    pub scores: Vec<f64>,
    pub histogram: ScoreHistogram,
    pub mixture: GaussianMixture,
    pub assignment: Assignment,
}

/// PCA, projection, histogram, mixture fit and assignment for one arm.
pub fn analyze_traces(traces: &TraceSet, max_components: usize, config: &FitConfig) -> Result<TraceAnalysis> {
    let pca = principal_component(traces)?;
    let scores = project_scores(traces, &pca)?;
    let histogram = ScoreHistogram::auto(&scores)?;
    let mixture = fit_mixture(&histogram, max_components, config)?;
    let assignment = assign_numbers(&scores, &mixture);
    if let Some(res) = mixture.resolution() {
        if res < 4.0 {
            log::warn!("adjacent photon classes overlap: spacing is {res:.2} sigma");
        }
    }
    Ok(TraceAnalysis {
        pca,
        scores,
        histogram,
        mixture,
        assignment,
    })
}

/// Result of pushing known counts through the forward model and back.
#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub misclassification_rate: f64,
    pub analysis: TraceAnalysis,
}

impl RoundTrip {
    pub fn assigned(&self) -> &[u32] {
        &self.analysis.assignment.numbers
    }

    pub fn tail_fraction(&self) -> f64 {
        self.analysis.assignment.tail_fraction()
    }
}

/// Generate traces for `counts`, classify them, and report the fraction of
/// pulses whose recovered number differs from the truth.
pub fn round_trip(
    counts: &[u32],
    template: &PulseTemplate,
    sample_period: f64,
    seed: u64,
    max_components: usize,
) -> Result<RoundTrip> {
    let traces = generate_traces(counts, template, sample_period, seed)?;
    let analysis = analyze_traces(&traces, max_components, &FitConfig::default())?;
    let wrong = analysis
        .assignment
        .numbers
        .iter()
        .zip(counts)
        .filter(|(a, b)| a != b)
        .count();
    Ok(RoundTrip {
        misclassification_rate: wrong as f64 / counts.len().max(1) as f64,
        analysis,
    })
}

/// Both arms of a count set through the round trip; the idler arm uses a
/// seed offset so its noise is independent of the signal arm.
pub fn round_trip_counts(
    counts: &CountSet,
    template: &PulseTemplate,
    sample_period: f64,
    seed: u64,
    max_components: usize,
) -> Result<(CountSet, RoundTrip, RoundTrip)> {
    let signal = round_trip(&counts.column(Arm::Signal), template, sample_period, seed, max_components)?;
    let idler = round_trip(
        &counts.column(Arm::Idler),
        template,
        sample_period,
        seed.wrapping_add(0x9E37_79B9_7F4A_7C15),
        max_components,
    )?;
    let pulses = signal
        .assigned()
        .iter()
        .zip(idler.assigned())
        .map(|(&s, &i)| PulseCount::new(s, i))
        .collect();
    Ok((CountSet::from_pulses(pulses, counts.seed), signal, idler))
}
