//! Score histogram, Gaussian-mixture fit and photon-number boundaries.

use nalgebra::{DMatrix, DVector};

use super::{Result, TesError};
use crate::estimation::{minimize, FitConfig, LeastSquares};

/// Relative residual improvement below which another component is not worth adding.
const IMPROVEMENT_THRESHOLD: f64 = 0.05;
/// Smallest Poisson-deviance drop that justifies three more parameters: the
/// 99th percentile of χ² with 3 degrees of freedom. Below it the extra
/// component fits noise.
const MIN_DEVIANCE_GAIN: f64 = 11.34;
/// A larger fit is rejected when two adjacent components sit closer than this
/// many sigmas; such a component is fitting noise or an unresolvable class.
const MIN_RESOLUTION: f64 = 3.0;
/// Moving-average window used to seed peaks.
const SMOOTHING_WINDOW: usize = 5;

/// `floor(√N/4)` bins, at least 8. Needs `N ≥ 16`.
pub fn bin_count(num_samples: usize) -> Result<usize> {
    if num_samples < 16 {
        return Err(TesError::Domain(format!("histogram needs at least 16 scores, got {num_samples}")));
    }
    Ok((((num_samples as f64).sqrt() / 4.0).floor() as usize).max(8))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistogram {
    pub bin_edges: Vec<f64>,
    pub bin_counts: Vec<u64>,
}

impl ScoreHistogram {
    /// Uniform bins over `[min, max]` of the scores; the last bin is closed.
    pub fn new(scores: &[f64], bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(TesError::Domain("histogram needs at least one bin".into()));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(TesError::Domain(format!("non-finite score {s}")));
        }
        let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(TesError::Degenerate("scores have zero spread".into()));
        }
        let width = (hi - lo) / bins as f64;
        let bin_edges: Vec<f64> = (0..=bins)
            .map(|k| if k == bins { hi } else { lo + width * k as f64 })
            .collect();
        let mut bin_counts = vec![0u64; bins];
        for &s in scores {
            let k = (((s - lo) / width) as usize).min(bins - 1);
            bin_counts[k] += 1;
        }
        Ok(Self { bin_edges, bin_counts })
    }

    /// Histogram with `bin_count(scores.len())` bins.
    pub fn auto(scores: &[f64]) -> Result<Self> {
        Self::new(scores, bin_count(scores.len())?)
    }

    pub fn bins(&self) -> usize {
        self.bin_counts.len()
    }

    pub fn total(&self) -> u64 {
        self.bin_counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn span(&self) -> (f64, f64) {
        (self.bin_edges[0], self.bin_edges[self.bins()] - self.bin_edges[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    /// Peak height in counts per bin.
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
}

impl GaussianComponent {
    pub fn eval(&self, s: f64) -> f64 {
        self.amplitude * (-(s - self.mean).powi(2) / (2.0 * self.sigma * self.sigma)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    /// Ordered by ascending mean; index equals photon number.
    pub components: Vec<GaussianComponent>,
    /// Decision boundaries between consecutive components.
    pub boundaries: Vec<f64>,
    /// Poisson-weighted residual norm of the selected fit.
    pub residual_norm: f64,
    /// `(component count, weighted residual norm)` for every count tried.
    pub scan: Vec<(usize, f64)>,
    pub notes: Vec<String>,
}

impl GaussianMixture {
    /// Smallest ratio of adjacent mean spacing to the wider of the two sigmas.
    pub fn resolution(&self) -> Option<f64> {
        resolution(&self.components)
    }

    /// Scores above this value sit beyond where an unfitted next class would start.
    pub fn tail_cutoff(&self) -> f64 {
        let top = self.components.last().expect("mixture has components");
        match self.boundaries.last() {
            Some(b) => top.mean + (top.mean - b),
            None => top.mean + 3.0 * top.sigma,
        }
    }
}

fn resolution(components: &[GaussianComponent]) -> Option<f64> {
    components
        .windows(2)
        .map(|w| (w[1].mean - w[0].mean) / w[0].sigma.max(w[1].sigma))
        .min_by(f64::total_cmp)
}

/// Sum of Gaussians against bin counts with `√count` weights (floor 1).
///
/// Each component is integrated over the bin, scaled so that `A` is the peak
/// height per bin once `σ` spans several bins. Parameters per component:
/// `(ln A, logit µ, ln(σ − σ_floor))` in unit-span coordinates. The logit
/// keeps means on the histogram, so an edge peak cannot be fitted by a far-off
/// Gaussian tail; the floor only stops `σ` from underflowing.
struct MixtureProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    bin_width: f64,
    sigma_floor: f64,
}

/// `Φ(b) − Φ(a)` for `a ≤ b` without cancellation in either tail.
fn normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (libm::erfc(a * s) - libm::erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * s) - libm::erfc(-a * s))
    } else {
        1.0 - 0.5 * (libm::erfc(b * s) + libm::erfc(-a * s))
    }
}

impl MixtureProblem {
    fn sigma(&self, ls: f64) -> f64 {
        self.sigma_floor + ls.exp()
    }

    fn mean(t: f64) -> f64 {
        1.0 / (1.0 + (-t).exp())
    }

    fn logit(mu: f64) -> f64 {
        let mu = mu.clamp(1e-9, 1.0 - 1e-9);
        (mu / (1.0 - mu)).ln()
    }

    /// Poisson deviance `2 Σ [m − y + y ln(y/m)]` of the model at `p`.
    fn deviance(&self, p: &DVector<f64>) -> f64 {
        let m = self.model(p);
        2.0 * m
            .iter()
            .zip(&self.y)
            .map(|(&m, &y)| {
                let m = m.max(1e-300);
                let log_term = if y > 0.0 { y * (y / m).ln() } else { 0.0 };
                m - y + log_term
            })
            .sum::<f64>()
    }

    fn model(&self, p: &DVector<f64>) -> Vec<f64> {
        let r = self.eval(p, None);
        r.iter().zip(&self.y).zip(&self.w).map(|((r, y), w)| r / w + y).collect()
    }

    fn eval(&self, p: &DVector<f64>, jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let k = p.len() / 3;
        let half = 0.5 * self.bin_width;
        let norm = (2.0 * std::f64::consts::PI).sqrt() / self.bin_width;
        let mut res = DVector::zeros(self.x.len());
        let mut jac = jac;
        for (i, &x) in self.x.iter().enumerate() {
            let mut model = 0.0;
            for c in 0..k {
                let (la, t, ls) = (p[3 * c], p[3 * c + 1], p[3 * c + 2]);
                let (amp, mu, sigma) = (la.exp(), Self::mean(t), self.sigma(ls));
                let lo = (x - half - mu) / sigma;
                let hi = (x + half - mu) / sigma;
                let b = amp * sigma * norm * normal_mass(lo, hi);
                model += b;
                if let Some(j) = jac.as_deref_mut() {
                    let (e_lo, e_hi) = ((-0.5 * lo * lo).exp(), (-0.5 * hi * hi).exp());
                    let d_mu = amp / self.bin_width * (e_lo - e_hi);
                    let d_sigma = b / sigma + amp / self.bin_width * (lo * e_lo - hi * e_hi);
                    j[(i, 3 * c)] = b * self.w[i];
                    j[(i, 3 * c + 1)] = d_mu * mu * (1.0 - mu) * self.w[i];
                    j[(i, 3 * c + 2)] = d_sigma * ls.exp() * self.w[i];
                }
            }
            res[i] = (model - self.y[i]) * self.w[i];
        }
        res
    }
}

impl LeastSquares for MixtureProblem {
    fn residuals(&self, p: &DVector<f64>) -> Option<DVector<f64>> {
        let r = self.eval(p, None);
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.x.len(), p.len());
        self.eval(p, Some(&mut j));
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

fn smoothed(counts: &[u64]) -> Vec<f64> {
    let half = SMOOTHING_WINDOW / 2;
    (0..counts.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(counts.len());
            counts[lo..hi].iter().sum::<u64>() as f64 / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of the smoothed histogram, tallest first.
fn peak_seeds(counts: &[u64]) -> Vec<usize> {
    let s = smoothed(counts);
    let n = s.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { s[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { s[i + 1] };
            s[i] > 0.0 && s[i] > left && s[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    peaks
}

/// Fitted parameters, components sorted by mean (unit-span coordinates), residual norm.
type Fitted = (DVector<f64>, Vec<GaussianComponent>, f64);

fn fit_components(problem: &MixtureProblem, start: DVector<f64>, config: &FitConfig) -> Result<Fitted> {
    let k = start.len() / 3;
    let out = minimize(problem, start, config).map_err(TesError::Fit)?;
    let mut comps: Vec<GaussianComponent> = (0..k)
        .map(|c| GaussianComponent {
            amplitude: out.params[3 * c].exp(),
            mean: MixtureProblem::mean(out.params[3 * c + 1]),
            sigma: problem.sigma(out.params[3 * c + 2]),
        })
        .collect();
    comps.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let bin_width = problem.bin_width;
    let distinct = comps.windows(2).all(|w| w[1].mean - w[0].mean > 0.5 * bin_width);
    let sane = comps
        .iter()
        .all(|c| c.amplitude > 0.0 && c.amplitude.is_finite() && c.mean.is_finite() && c.sigma.is_finite());
    if !(distinct && sane) {
        return Err(TesError::Degenerate(format!("{k}-component fit collapsed")));
    }
    let norm = out.residual_norm();
    Ok((out.params, comps, norm))
}

/// `(ln A, logit µ, ln(σ − σ_floor))` for a peak of `values` at `bin`, with σ
/// from the half-maximum crossing nearest the peak.
fn seed_at(problem: &MixtureProblem, values: &[f64], bin: usize) -> [f64; 3] {
    let n = values.len();
    let height = values[bin];
    let left = (0..bin).rev().find(|&i| values[i] < 0.5 * height).map_or(bin, |i| bin - i);
    let right = (bin + 1..n).find(|&i| values[i] < 0.5 * height).map_or(n - 1 - bin, |i| i - bin);
    let bin_width = problem.bin_width;
    // half width at half maximum is 1.1774 σ; crossing distances overshoot by half a bin
    let hwhm = (left.min(right) as f64 - 0.5).max(0.5) * bin_width;
    let sigma = (hwhm / 1.1774).max(2.0 * problem.sigma_floor);
    [
        height.max(1.0).ln(),
        MixtureProblem::logit(problem.x[bin]),
        (sigma - problem.sigma_floor).ln(),
    ]
}

/// Start for the first component: the raw maximum within the smoothing window
/// of the tallest smoothed peak.
fn first_seed(problem: &MixtureProblem, smoothed_peak: usize) -> DVector<f64> {
    let half = SMOOTHING_WINDOW / 2;
    let window = smoothed_peak.saturating_sub(half)..(smoothed_peak + half + 1).min(problem.y.len());
    let bin = window
        .max_by(|&a, &b| problem.y[a].total_cmp(&problem.y[b]).then(b.cmp(&a)))
        .expect("non-empty window");
    DVector::from_row_slice(&seed_at(problem, &problem.y, bin))
}

/// Previous parameters plus one component at the histogram peak the current
/// model explains worst, or `None` when nothing is left unexplained. Only
/// local maxima of the counts qualify: a class shows up as a peak, while the
/// excess on the flank of a non-Gaussian peak does not.
fn grow_seed(problem: &MixtureProblem, prev: &Fitted) -> Option<DVector<f64>> {
    let y = &problem.y;
    let n = y.len();
    let is_peak = |i: usize| (i == 0 || y[i] > y[i - 1]) && (i + 1 == n || y[i] >= y[i + 1]);
    let excess: Vec<f64> = problem.model(&prev.0).iter().zip(y).map(|(m, y)| y - m).collect();
    let (bin, weighted) = excess
        .iter()
        .zip(&problem.w)
        .map(|(e, w)| e * w)
        .enumerate()
        .filter(|&(i, _)| is_peak(i))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if !(weighted > 0.5) {
        return None;
    }
    let mut next = prev.0.as_slice().to_vec();
    next.extend(seed_at(problem, &excess, bin));
    Some(DVector::from_vec(next))
}

/// Intersection of two weighted Gaussians lying between their means.
/// Falls back to the midpoint (and says so) when no root lies between them.
pub fn boundary_between(a: &GaussianComponent, b: &GaussianComponent) -> (f64, bool) {
    let (va, vb) = (a.sigma * a.sigma, b.sigma * b.sigma);
    let qa = 0.5 / vb - 0.5 / va;
    let qb = a.mean / va - b.mean / vb;
    let qc = b.mean * b.mean / (2.0 * vb) - a.mean * a.mean / (2.0 * va) + a.amplitude.ln() - b.amplitude.ln();
    let inside = |s: f64| s > a.mean && s < b.mean;
    let mid = 0.5 * (a.mean + b.mean);
    let roots: Vec<f64> = if qa.abs() <= 1e-12 * (0.5 / va + 0.5 / vb) {
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            vec![]
        } else {
            let sq = disc.sqrt();
            // numerically stable pair of roots
            let q = -0.5 * (qb + qb.signum() * sq);
            vec![q / qa, qc / q]
        }
    };
    roots
        .into_iter()
        .filter(|&s| s.is_finite() && inside(s))
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .map_or((mid, true), |s| (s, false))
}

/// Fit a sum of Gaussians to `hist`, choosing the component count by scanning
/// `1..=max_components` and stopping once one more component improves the
/// weighted residual by less than 5 % or lowers the Poisson deviance by less
/// than [`MIN_DEVIANCE_GAIN`].
///
/// The first component starts at the tallest peak of the smoothed histogram.
/// Each larger fit starts from the previous optimum plus one component placed
/// at the histogram peak with the largest weighted excess over that optimum.
pub fn fit_mixture(hist: &ScoreHistogram, max_components: usize, config: &FitConfig) -> Result<GaussianMixture> {
    if hist.bins() < 3 {
        return Err(TesError::Domain(format!("mixture fit needs at least 3 bins, got {}", hist.bins())));
    }
    if max_components == 0 {
        return Err(TesError::Domain("max_components must be >= 1".into()));
    }
    let (origin, span) = hist.span();
    let x: Vec<f64> = hist.centers().iter().map(|c| (c - origin) / span).collect();
    let y: Vec<f64> = hist.bin_counts.iter().map(|&c| c as f64).collect();
    let w: Vec<f64> = hist.bin_counts.iter().map(|&c| 1.0 / (c.max(1) as f64).sqrt()).collect();
    let bin_width = 1.0 / hist.bins() as f64;
    let problem = MixtureProblem {
        x,
        y,
        w,
        bin_width,
        sigma_floor: 0.05 * bin_width,
    };
    let config = FitConfig {
        gradient_tolerance: config.gradient_tolerance * (1.0 + hist.total() as f64).sqrt(),
        cost_tolerance: config.cost_tolerance.max(1e-10),
        residual_tolerance: config.residual_tolerance.max(1e-2),
        ..*config
    };

    let Some(&top_peak) = peak_seeds(&hist.bin_counts).first() else {
        return Err(TesError::Degenerate("histogram has no peak".into()));
    };
    let mut scan = Vec::new();
    let mut notes = Vec::new();
    let mut chosen = fit_components(&problem, first_seed(&problem, top_peak), &config)?;
    scan.push((1, chosen.2));
    for k in 2..=max_components {
        if chosen.2 <= 1e-9 * (hist.total() as f64).sqrt() {
            notes.push(format!("selected {} components: histogram reproduced exactly", k - 1));
            break;
        }
        let Some(start) = grow_seed(&problem, &chosen) else {
            notes.push(format!("selected {} components: no unexplained excess left", k - 1));
            break;
        };
        let fitted = match fit_components(&problem, start, &config) {
            Ok(f) => f,
            Err(e) => {
                notes.push(format!("selected {} components: {k}-component fit failed ({e})", k - 1));
                break;
            }
        };
        scan.push((k, fitted.2));
        let resolution = resolution(&fitted.1).unwrap_or(f64::INFINITY);
        if resolution < MIN_RESOLUTION {
            notes.push(format!(
                "selected {} components: {k}-component fit puts adjacent means {resolution:.2} sigma apart",
                k - 1
            ));
            break;
        }
        let improvement = (chosen.2 - fitted.2) / chosen.2;
        if improvement < IMPROVEMENT_THRESHOLD {
            notes.push(format!(
                "selected {} components: adding one more improves residual by {:.2}%",
                k - 1,
                100.0 * improvement
            ));
            break;
        }
        let gain = problem.deviance(&chosen.0) - problem.deviance(&fitted.0);
        if !(gain >= MIN_DEVIANCE_GAIN) {
            notes.push(format!(
                "selected {} components: adding one more lowers the deviance by only {gain:.2}",
                k - 1
            ));
            break;
        }
        chosen = fitted;
        if k == max_components {
            notes.push(format!("selected {k} components (scan limit)"));
        }
    }
    let (_, unit_comps, residual_norm) = chosen;
    log::info!("{}", notes.last().map(String::as_str).unwrap_or("mixture fit done"));

    let components: Vec<GaussianComponent> = unit_comps
        .iter()
        .map(|c| GaussianComponent {
            amplitude: c.amplitude,
            mean: origin + c.mean * span,
            sigma: c.sigma * span,
        })
        .collect();
    let mut boundaries = Vec::with_capacity(components.len().saturating_sub(1));
    for (i, pair) in components.windows(2).enumerate() {
        let (b, fallback) = boundary_between(&pair[0], &pair[1]);
        if fallback {
            log::warn!("no intersection between components {i} and {}; using midpoint", i + 1);
            notes.push(format!("boundary {i}/{} fell back to midpoint", i + 1));
        }
        boundaries.push(b);
    }
    Ok(GaussianMixture {
        components,
        boundaries,
        residual_norm,
        scan,
        notes,
    })
}

/// Photon numbers for each score plus the tail diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub numbers: Vec<u32>,
    /// Scores beyond [`GaussianMixture::tail_cutoff`]; assigned the top class.
    pub tail_count: usize,
}

impl Assignment {
    pub fn tail_fraction(&self) -> f64 {
        if self.numbers.is_empty() {
            0.0
        } else {
            self.tail_count as f64 / self.numbers.len() as f64
        }
    }
}

/// Index of the boundary interval holding each score; a score equal to a
/// boundary goes to the lower class.
pub fn assign_numbers(scores: &[f64], mixture: &GaussianMixture) -> Assignment {
    let cutoff = mixture.tail_cutoff();
    let numbers: Vec<u32> = scores
        .iter()
        .map(|&s| mixture.boundaries.partition_point(|&b| b < s) as u32)
        .collect();
    let tail_count = scores.iter().filter(|&&s| s > cutoff).count();
    Assignment { numbers, tail_count }
}
