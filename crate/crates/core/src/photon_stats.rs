//! Photon-number statistics of a lossy multimode two-mode squeezed vacuum.
//!
//! [`sample_counts`] draws per-pulse `(n_S, n_I)` exactly: each Schmidt mode
//! contributes a pair number with `P(n) = tanh²ⁿr / cosh²r`, the mode-summed
//! pairs are binomially thinned per arm and independent Poisson background is
//! added. The estimators follow the subset protocol: a quantity is computed on
//! each of `k` equal subsets and reported as mean ± sample standard deviation.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::estimation::{subset_stats, SubsetStats};
use crate::rng::{Stage, Substreams};

/// Counts strictly above this value are flagged as detector-saturated.
pub const SATURATION_LIMIT: u32 = 10;

/// Pair-number tail probability left out by the inverse-CDF sampler.
const TAIL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("invalid {name} = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("need at least {needed} pulses, got {got}")]
    TooFewPulses { needed: usize, got: usize },
    #[error("need at least 2 subsets, got {0}")]
    TooFewSubsets(usize),
    #[error("mean photon number of the {0} arm is zero; statistic is undefined")]
    ZeroMean(Arm),
    #[error("total mean photon number is zero; noise reduction factor is undefined")]
    ZeroTotal,
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Arm::Signal => "signal",
            Arm::Idler => "idler",
        })
    }
}

/// Schmidt-mode squeezing parameters plus per-arm loss and background.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub squeezing: Vec<f64>,
    pub eta_signal: f64,
    pub eta_idler: f64,
    /// Mean background photons per pulse in the signal arm.
    pub noise_signal: f64,
    pub noise_idler: f64,
}

impl SchmidtSpectrum {
    pub fn new(squeezing: Vec<f64>, eta_signal: f64, eta_idler: f64) -> Result<Self> {
        let spec = Self {
            squeezing,
            eta_signal,
            eta_idler,
            noise_signal: 0.0,
            noise_idler: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// One mode carrying `mean_pairs = sinh²r` pairs on average.
    pub fn single_mode(mean_pairs: f64, eta_signal: f64, eta_idler: f64) -> Result<Self> {
        Self::equal_modes(1, mean_pairs, eta_signal, eta_idler)
    }

    /// `modes` equally squeezed modes sharing `total_mean_pairs`.
    pub fn equal_modes(modes: usize, total_mean_pairs: f64, eta_signal: f64, eta_idler: f64) -> Result<Self> {
        if modes == 0 {
            return Err(domain("modes", 0.0, "must be >= 1"));
        }
        if !(total_mean_pairs >= 0.0 && total_mean_pairs.is_finite()) {
            return Err(domain("total_mean_pairs", total_mean_pairs, "must be finite and >= 0"));
        }
        let r = (total_mean_pairs / modes as f64).sqrt().asinh();
        Self::new(vec![r; modes], eta_signal, eta_idler)
    }

    pub fn with_noise(mut self, noise_signal: f64, noise_idler: f64) -> Result<Self> {
        self.noise_signal = noise_signal;
        self.noise_idler = noise_idler;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.squeezing.is_empty() {
            return Err(domain("squeezing", 0.0, "spectrum must contain at least one mode"));
        }
        for &r in &self.squeezing {
            if !(r.is_finite() && r >= 0.0) {
                return Err(domain("squeezing parameter", r, "must be finite and >= 0"));
            }
        }
        for (name, eta) in [("eta_signal", self.eta_signal), ("eta_idler", self.eta_idler)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(domain(name, eta, "must lie in [0, 1]"));
            }
        }
        for (name, n) in [("noise_signal", self.noise_signal), ("noise_idler", self.noise_idler)] {
            if !(n.is_finite() && n >= 0.0) {
                return Err(domain(name, n, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// `sinh²r_ℓ` for every mode.
    pub fn mode_populations(&self) -> Vec<f64> {
        self.squeezing.iter().map(|r| r.sinh().powi(2)).collect()
    }

    pub fn mean_pairs(&self) -> f64 {
        self.mode_populations().iter().sum()
    }

    fn arm(&self, arm: Arm) -> (f64, f64) {
        match arm {
            Arm::Signal => (self.eta_signal, self.noise_signal),
            Arm::Idler => (self.eta_idler, self.noise_idler),
        }
    }

    /// Expected detected photons per pulse in one arm, background included.
    pub fn expected_mean(&self, arm: Arm) -> f64 {
        let (eta, noise) = self.arm(arm);
        eta * self.mean_pairs() + noise
    }

    pub fn expected_total(&self) -> f64 {
        self.expected_mean(Arm::Signal) + self.expected_mean(Arm::Idler)
    }

    /// `V_Δn` for arbitrary `η_S`, `η_I` plus the Poisson background variance.
    pub fn expected_vardiff(&self) -> f64 {
        let (es, ei) = (self.eta_signal, self.eta_idler);
        let pops = self.mode_populations();
        let term = |eta: f64| -> f64 { eta * pops.iter().map(|s| s * (eta * s + 1.0)).sum::<f64>() };
        let cross = 2.0 * es * ei * pops.iter().map(|s| s * (1.0 + s)).sum::<f64>();
        term(es) + term(ei) - cross + self.noise_signal + self.noise_idler
    }

    pub fn expected_nrf(&self) -> Result<f64> {
        let total = self.expected_total();
        if total <= 0.0 {
            return Err(StatsError::ZeroTotal);
        }
        Ok(self.expected_vardiff() / total)
    }

    /// Unheralded `g²` of one arm: `1 + Σm_ℓ²/(Σm_ℓ + n_p)²` with `m_ℓ = η sinh²r_ℓ`.
    pub fn expected_g2(&self, arm: Arm) -> Result<f64> {
        let (eta, noise) = self.arm(arm);
        let pops = self.mode_populations();
        let mean = eta * pops.iter().sum::<f64>() + noise;
        if mean <= 0.0 {
            return Err(StatsError::ZeroMean(arm));
        }
        let square_sum: f64 = pops.iter().map(|s| (eta * s).powi(2)).sum();
        Ok(1.0 + square_sum / (mean * mean))
    }
}

fn domain(name: &'static str, value: f64, reason: &'static str) -> StatsError {
    StatsError::Domain { name, value, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PulseCount {
    pub signal: u32,
    pub idler: u32,
}

impl PulseCount {
    pub fn new(signal: u32, idler: u32) -> Self {
        Self { signal, idler }
    }

    pub fn get(&self, arm: Arm) -> u32 {
        match arm {
            Arm::Signal => self.signal,
            Arm::Idler => self.idler,
        }
    }

    pub fn is_saturated(&self) -> bool {
        self.signal > SATURATION_LIMIT || self.idler > SATURATION_LIMIT
    }
}

/// Per-pulse photon numbers with their saturation flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSet {
    pub pulses: Vec<PulseCount>,
    pub seed: u64,
    pub saturated: Vec<bool>,
}

impl CountSet {
    pub fn from_pulses(pulses: Vec<PulseCount>, seed: u64) -> Self {
        let saturated = pulses.iter().map(PulseCount::is_saturated).collect();
        Self { pulses, seed, saturated }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn saturated_count(&self) -> usize {
        self.saturated.iter().filter(|&&s| s).count()
    }

    /// Pulses with no flagged arm, in original order.
    pub fn unsaturated(&self) -> Vec<PulseCount> {
        self.pulses
            .iter()
            .zip(&self.saturated)
            .filter(|(_, &s)| !s)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn column(&self, arm: Arm) -> Vec<u32> {
        self.pulses.iter().map(|p| p.get(arm)).collect()
    }
}

/// Inverse-CDF draw from `P(n) = (1−p)pⁿ`, `p = tanh²r`, truncated at
/// cumulative probability `1 − 10⁻¹²`.
fn draw_pairs<R: Rng>(rng: &mut R, tanh_sq: f64, cap: u64) -> u64 {
    if tanh_sq <= 0.0 {
        return 0;
    }
    // (0, 1]
    let u = 1.0 - rng.random::<f64>();
    let n = (u.ln() / tanh_sq.ln()).floor();
    if n >= cap as f64 {
        cap
    } else {
        n as u64
    }
}

fn tail_cap(tanh_sq: f64) -> u64 {
    if tanh_sq <= 0.0 {
        0
    } else {
        (TAIL_CUTOFF.ln() / tanh_sq.ln()).ceil() as u64
    }
}

fn thin<R: Rng>(rng: &mut R, n: u64, eta: f64) -> u64 {
    if n == 0 || eta <= 0.0 {
        0
    } else if eta >= 1.0 {
        n
    } else {
        Binomial::new(n, eta).expect("validated efficiency").sample(rng)
    }
}

fn background<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("validated noise mean").sample(rng) as u64
    }
}

/// Draw `num_pulses` photon-number pairs. Deterministic in `(spec, num_pulses, seed)`
/// independent of thread count.
pub fn sample_counts(spec: &SchmidtSpectrum, num_pulses: usize, seed: u64) -> Result<CountSet> {
    spec.validate()?;
    if num_pulses == 0 {
        return Err(StatsError::TooFewPulses { needed: 1, got: 0 });
    }
    let modes: Vec<(f64, u64)> = spec
        .squeezing
        .iter()
        .map(|r| {
            let t = r.tanh().powi(2);
            (t, tail_cap(t))
        })
        .collect();
    let streams = Substreams::new(seed);

    let pulses = (0..num_pulses as u64)
        .into_par_iter()
        .map(|index| {
            let mut pair_rng = streams.stream(index, Stage::PairNumbers);
            let pairs: u64 = modes.iter().map(|&(t, cap)| draw_pairs(&mut pair_rng, t, cap)).sum();
            // thinning the mode sum is equivalent to thinning each mode with the same η
            let s = thin(&mut streams.stream(index, Stage::ThinSignal), pairs, spec.eta_signal)
                + background(&mut streams.stream(index, Stage::NoiseSignal), spec.noise_signal);
            let i = thin(&mut streams.stream(index, Stage::ThinIdler), pairs, spec.eta_idler)
                + background(&mut streams.stream(index, Stage::NoiseIdler), spec.noise_idler);
            PulseCount::new(saturating_u32(s), saturating_u32(i))
        })
        .collect();
    Ok(CountSet::from_pulses(pulses, seed))
}

fn saturating_u32(n: u64) -> u32 {
    u32::try_from(n).unwrap_or(u32::MAX)
}

/// Unbiased sample variance of `n_S − n_I` and mean of `n_S + n_I`.
pub fn vardiff_and_total(pulses: &[PulseCount]) -> Result<(f64, f64)> {
    if pulses.len() < 2 {
        return Err(StatsError::TooFewPulses {
            needed: 2,
            got: pulses.len(),
        });
    }
    let n = pulses.len() as f64;
    let (mut sum_d, mut sum_t) = (0.0, 0.0);
    for p in pulses {
        sum_d += p.signal as f64 - p.idler as f64;
        sum_t += p.signal as f64 + p.idler as f64;
    }
    let mean_d = sum_d / n;
    let ss: f64 = pulses
        .iter()
        .map(|p| (p.signal as f64 - p.idler as f64 - mean_d).powi(2))
        .sum();
    Ok((ss / (n - 1.0), sum_t / n))
}

/// `(⟨n²⟩ − ⟨n⟩)/⟨n⟩²` of one arm over all given pulses.
pub fn g2_single(pulses: &[PulseCount], arm: Arm) -> Result<f64> {
    if pulses.is_empty() {
        return Err(StatsError::TooFewPulses { needed: 1, got: 0 });
    }
    let n = pulses.len() as f64;
    let (mut s1, mut s2) = (0.0, 0.0);
    for p in pulses {
        let k = p.get(arm) as f64;
        s1 += k;
        s2 += k * k;
    }
    let mean = s1 / n;
    if mean <= 0.0 {
        return Err(StatsError::ZeroMean(arm));
    }
    Ok((s2 / n - mean) / (mean * mean))
}

/// Equal-size chunks, dropping the remainder.
fn subsets(pulses: &[PulseCount], count: usize) -> Result<std::slice::Chunks<'_, PulseCount>> {
    if count < 2 {
        return Err(StatsError::TooFewSubsets(count));
    }
    let size = pulses.len() / count;
    if size < 2 {
        return Err(StatsError::TooFewPulses {
            needed: 2 * count,
            got: pulses.len(),
        });
    }
    let dropped = pulses.len() - size * count;
    if dropped > 0 {
        log::info!("subset split drops {dropped} trailing pulses ({count} subsets of {size})");
    }
    Ok(pulses[..size * count].chunks(size))
}

fn over_subsets<F>(pulses: &[PulseCount], count: usize, f: F) -> Result<SubsetStats>
where
    F: Fn(&[PulseCount]) -> Result<f64>,
{
    let values = subsets(pulses, count)?.map(f).collect::<Result<Vec<_>>>()?;
    subset_stats(&values).map_err(|_| StatsError::TooFewSubsets(values.len()))
}

/// Noise reduction factor `V_Δn / n_tot` over `subsets` equal subsets.
pub fn nrf(pulses: &[PulseCount], subsets: usize) -> Result<SubsetStats> {
    over_subsets(pulses, subsets, |chunk| {
        let (v, t) = vardiff_and_total(chunk)?;
        if t <= 0.0 {
            return Err(StatsError::ZeroTotal);
        }
        Ok(v / t)
    })
}

/// Subset-averaged unheralded `g²` of one arm.
pub fn g2(pulses: &[PulseCount], arm: Arm, subsets: usize) -> Result<SubsetStats> {
    over_subsets(pulses, subsets, |chunk| g2_single(chunk, arm))
}

/// `K = 1/(g² − 1)`, the number of equally populated modes reproducing `g²`.
pub fn effective_mode_number(g2_value: f64) -> Result<f64> {
    if !(g2_value.is_finite() && g2_value > 1.0) {
        return Err(domain("g2", g2_value, "must exceed 1 for a finite mode number"));
    }
    Ok(1.0 / (g2_value - 1.0))
}

/// `g²` after adding Poisson background of mean `noise_mean` to a field with
/// noiseless `g²₀` and mean `signal_mean`: `1 + (g²₀ − 1)(n_th/(n_th + n_p))²`.
pub fn noise_degraded_g2(noiseless_g2: f64, signal_mean: f64, noise_mean: f64) -> Result<f64> {
    for (name, v) in [("noiseless_g2", noiseless_g2), ("signal_mean", signal_mean), ("noise_mean", noise_mean)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(domain(name, v, "must be finite and >= 0"));
        }
    }
    let total = signal_mean + noise_mean;
    if total == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + (noiseless_g2 - 1.0) * (signal_mean / total).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsOptions {
    pub subsets: usize,
    pub include_saturated: bool,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            subsets: 8,
            include_saturated: false,
        }
    }
}

/// All count estimators with their subset spreads.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStatistics {
    pub pulses_used: usize,
    pub pulses_flagged: usize,
    pub n_tot: SubsetStats,
    pub vardiff: SubsetStats,
    pub nrf: SubsetStats,
    pub g2_signal: SubsetStats,
    pub g2_idler: SubsetStats,
    /// Whole-set values.
    pub n_tot_all: f64,
    pub vardiff_all: f64,
}

impl CountStatistics {
    /// Noise reduction expressed in dB, `10·log10(NRF)`.
    pub fn nrf_db(&self) -> f64 {
        10.0 * self.nrf.mean.log10()
    }
}

pub fn count_statistics(counts: &CountSet, options: &StatsOptions) -> Result<CountStatistics> {
    let pulses = if options.include_saturated {
        counts.pulses.clone()
    } else {
        counts.unsaturated()
    };
    let (vardiff_all, n_tot_all) = vardiff_and_total(&pulses)?;
    if n_tot_all <= 0.0 {
        return Err(StatsError::ZeroTotal);
    }
    let n_tot = over_subsets(&pulses, options.subsets, |c| Ok(vardiff_and_total(c)?.1))?;
    let vardiff = over_subsets(&pulses, options.subsets, |c| Ok(vardiff_and_total(c)?.0))?;
    Ok(CountStatistics {
        pulses_used: pulses.len(),
        pulses_flagged: counts.len() - pulses.len(),
        n_tot,
        vardiff,
        nrf: nrf(&pulses, options.subsets)?,
        g2_signal: g2(&pulses, Arm::Signal, options.subsets)?,
        g2_idler: g2(&pulses, Arm::Idler, options.subsets)?,
        n_tot_all,
        vardiff_all,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mean(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        let m = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (m, var, n)
    }

    #[test]
    fn vacuum_gives_empty_pulses() {
        let spec = SchmidtSpectrum::new(vec![0.0, 0.0], 0.5, 0.5).unwrap();
        let counts = sample_counts(&spec, 1000, 1).unwrap();
        assert!(counts.pulses.iter().all(|p| *p == PulseCount::new(0, 0)));
    }

    #[test]
    fn lossless_pairs_are_perfectly_correlated() {
        let spec = SchmidtSpectrum::single_mode(1.0, 1.0, 1.0).unwrap();
        let counts = sample_counts(&spec, 200_000, 5).unwrap();
        assert!(counts.pulses.iter().all(|p| p.signal == p.idler));
        let (m, var, n) = mean(counts.pulses.iter().map(|p| p.signal as f64));
        // geometric with mean sinh²r = 1 has variance m(1+m) = 2
        assert!((m - 1.0).abs() < 3.0 * (var / n as f64).sqrt(), "mean {m}");
        assert_relative_eq!(var, 2.0, max_relative = 0.03);
    }

    #[test]
    fn pair_draw_matches_geometric_law() {
        // exact P(n) = (1−p)pⁿ against frequencies from the inverse-CDF draw
        let p: f64 = 0.4f64.tanh().powi(2);
        let cap = tail_cap(p);
        let mut rng = Substreams::new(3).stream(0, Stage::PairNumbers);
        let n = 400_000;
        let mut hist = [0usize; 6];
        for _ in 0..n {
            let k = draw_pairs(&mut rng, p, cap) as usize;
            if k < hist.len() {
                hist[k] += 1;
            }
        }
        for (k, &c) in hist.iter().enumerate() {
            let expected = (1.0 - p) * p.powi(k as i32) * n as f64;
            assert!((c as f64 - expected).abs() < 5.0 * expected.sqrt() + 1.0, "k={k}: {c} vs {expected}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = SchmidtSpectrum::equal_modes(3, 0.8, 0.4, 0.6).unwrap().with_noise(0.05, 0.02).unwrap();
        let a = sample_counts(&spec, 5000, 99).unwrap();
        let b = sample_counts(&spec, 5000, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_counts(&spec, 5000, 100).unwrap();
        assert_ne!(a.pulses, c.pulses);
        // prefix property: pulse i depends only on (seed, i)
        let short = sample_counts(&spec, 100, 99).unwrap();
        assert_eq!(&a.pulses[..100], &short.pulses[..]);
    }

    #[test]
    fn sampling_is_schedule_independent() {
        let spec = SchmidtSpectrum::single_mode(0.7, 0.3, 0.3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| sample_counts(&spec, 20_000, 4).unwrap());
        let multi = sample_counts(&spec, 20_000, 4).unwrap();
        assert_eq!(single, multi);
    }

    #[test]
    fn empty_spectrum_rejected() {
        assert!(SchmidtSpectrum::new(vec![], 0.5, 0.5).is_err());
        assert!(SchmidtSpectrum::new(vec![-0.1], 0.5, 0.5).is_err());
        let spec = SchmidtSpectrum::single_mode(1.0, 0.5, 0.5).unwrap();
        assert!(sample_counts(&spec, 0, 1).is_err());
    }

    #[test]
    fn vardiff_examples() {
        let constant = vec![PulseCount::new(3, 3); 10];
        assert_eq!(vardiff_and_total(&constant).unwrap(), (0.0, 6.0));
        assert!(vardiff_and_total(&constant[..1]).is_err());
        let pulses = [PulseCount::new(1, 0), PulseCount::new(0, 1), PulseCount::new(2, 2)];
        // Δ = {1, −1, 0}: mean 0, unbiased variance 1; total mean 2
        assert_eq!(vardiff_and_total(&pulses).unwrap(), (1.0, 2.0));
    }

    #[test]
    fn lossy_tmsv_nrf_tracks_efficiency() {
        let spec = SchmidtSpectrum::equal_modes(2, 1.5, 0.2, 0.2).unwrap();
        let counts = sample_counts(&spec, 400_000, 12).unwrap();
        let (v, t) = vardiff_and_total(&counts.pulses).unwrap();
        assert!((v / t - 0.8).abs() < 0.01, "nrf {}", v / t);
    }

    #[test]
    fn poisson_streams_have_unit_nrf_and_g2() {
        let spec = SchmidtSpectrum::new(vec![0.0], 1.0, 1.0).unwrap().with_noise(1.5, 1.5).unwrap();
        let counts = sample_counts(&spec, 400_000, 21).unwrap();
        let stats = count_statistics(&counts, &StatsOptions { subsets: 8, include_saturated: true }).unwrap();
        assert!((stats.nrf.mean - 1.0).abs() < 0.01);
        assert!((stats.g2_signal.mean - 1.0).abs() < 0.01);
        assert!((stats.g2_idler.mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn perfect_detection_has_zero_nrf() {
        let spec = SchmidtSpectrum::single_mode(0.8, 1.0, 1.0).unwrap();
        let counts = sample_counts(&spec, 80_000, 2).unwrap();
        let est = nrf(&counts.pulses, 8).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std, 0.0);
    }

    #[test]
    fn subset_protocol_errors() {
        let pulses = vec![PulseCount::new(1, 0); 100];
        assert_eq!(nrf(&pulses, 1).unwrap_err(), StatsError::TooFewSubsets(1));
        assert!(matches!(nrf(&pulses[..5], 8), Err(StatsError::TooFewPulses { .. })));
        let zero = vec![PulseCount::new(0, 3); 100];
        assert_eq!(g2(&zero, Arm::Signal, 4).unwrap_err(), StatsError::ZeroMean(Arm::Signal));
        let none = vec![PulseCount::new(0, 0); 100];
        assert_eq!(nrf(&none, 4).unwrap_err(), StatsError::ZeroTotal);
    }

    #[test]
    fn remainder_is_dropped() {
        // 8 subsets of 12; the last 5 pulses would change the answer if used
        let mut pulses = vec![PulseCount::new(1, 1); 96];
        pulses.extend(vec![PulseCount::new(9, 0); 5]);
        let est = nrf(&pulses, 8).unwrap();
        assert_eq!(est.values.len(), 8);
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn mode_number_examples() {
        assert_relative_eq!(effective_mode_number(2.0).unwrap(), 1.0);
        assert_relative_eq!(effective_mode_number(1.1).unwrap(), 10.0, max_relative = 1e-12);
        assert!((effective_mode_number(1.87).unwrap() - 1.149).abs() < 1e-3);
        assert!(effective_mode_number(1.0).is_err());
        assert!(effective_mode_number(0.8).is_err());
    }

    #[test]
    fn noise_degraded_examples() {
        assert_eq!(noise_degraded_g2(1.9, 1.2, 0.0).unwrap(), 1.9);
        let v = noise_degraded_g2(1.9, 1.2, 0.02).unwrap();
        assert!((v - 1.87).abs() < 0.005, "{v}");
        assert!((noise_degraded_g2(2.0, 1.0, 1e12).unwrap() - 1.0).abs() < 1e-9);
        assert!(noise_degraded_g2(2.0, -1.0, 0.1).is_err());
    }

    #[test]
    fn analytic_moments_are_consistent() {
        let spec = SchmidtSpectrum::equal_modes(4, 2.0, 0.3, 0.3).unwrap();
        assert_relative_eq!(spec.expected_nrf().unwrap(), 0.7, max_relative = 1e-12);
        assert_relative_eq!(spec.expected_g2(Arm::Signal).unwrap(), 1.25, max_relative = 1e-12);
        let noisy = spec.clone().with_noise(0.1, 0.1).unwrap();
        assert!(noisy.expected_nrf().unwrap() > 0.7);
        assert!(noisy.expected_g2(Arm::Idler).unwrap() < 1.25);
    }

    #[test]
    fn saturation_flags() {
        let counts = CountSet::from_pulses(vec![PulseCount::new(10, 3), PulseCount::new(11, 0), PulseCount::new(2, 12)], 0);
        assert_eq!(counts.saturated, vec![false, true, true]);
        assert_eq!(counts.unsaturated(), vec![PulseCount::new(10, 3)]);
    }
}
