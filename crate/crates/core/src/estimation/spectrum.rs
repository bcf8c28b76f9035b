//! Squeezing-spectrum and power-sweep fits against the closed-form ring model.

use nalgebra::{DMatrix, DVector};

use super::lm::{minimize, LeastSquares, LmOutcome};
use super::{internal_std_errors, FitConfig, FitError, FitResult, Result, Transform};
use rand_distr::{Distribution, Normal};

use crate::ring_model::{extremal_variances, from_db, symmetric_gradient_detuning_sq, SpectrumPoint};
use crate::rng::{Stage, Substreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Anti-squeezed (maximum over phase).
    Plus,
    /// Squeezed (minimum over phase).
    Minus,
}

/// One measured extremal variance at sideband `omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    pub omega: f64,
    pub v_db: f64,
    pub branch: Branch,
}

/// Detuning convention assumed by the spectrum fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumModel {
    /// `Δ = gΓ̄`; fits `(g, η, Γ̄)`.
    LockedShifted,
    /// `Δ = 0`; fits `(g, η, Γ̄)` with `g < 1`.
    LockedZero,
    /// Free detuning; fits `(g, η, Γ̄, (Δ/Γ̄)²)`. The variances are even in Δ,
    /// so only its square is identifiable.
    FreeDetuning,
}

impl SpectrumModel {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumModel::LockedShifted => "locked_shifted",
            SpectrumModel::LockedZero => "locked_zero",
            SpectrumModel::FreeDetuning => "free_detuning",
        }
    }

    fn parameter_names(self) -> &'static [&'static str] {
        match self {
            SpectrumModel::FreeDetuning => &["gain", "eta", "dissipation", "detuning_ratio_sq"],
            _ => &["gain", "eta", "dissipation"],
        }
    }

    fn transforms(self) -> &'static [Transform] {
        match self {
            SpectrumModel::FreeDetuning => &[Transform::Log, Transform::Logistic, Transform::Log, Transform::Identity],
            _ => &[Transform::Log, Transform::Logistic, Transform::Log],
        }
    }
}

/// Residuals `V_model − V_data` in linear variance units, parameterised in
/// solver coordinates `(ln g, logit η, ln Γ̄[, Δ/Γ̄])`.
#[derive(Debug, Clone)]
pub struct SpectrumProblem {
    omega: Vec<f64>,
    variance: Vec<f64>,
    branch: Vec<Branch>,
    model: SpectrumModel,
}

impl SpectrumProblem {
    pub fn new(samples: &[SpectrumSample], model: SpectrumModel) -> Self {
        Self {
            omega: samples.iter().map(|s| s.omega).collect(),
            variance: samples.iter().map(|s| from_db(s.v_db)).collect(),
            branch: samples.iter().map(|s| s.branch).collect(),
            model,
        }
    }

    /// Physical parameters to solver coordinates.
    pub fn to_internal(&self, physical: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            physical.len(),
            physical.iter().zip(self.model.transforms()).map(|(&x, t)| t.to_internal(x)),
        )
    }

    pub fn to_physical(&self, internal: &DVector<f64>) -> Vec<f64> {
        internal
            .iter()
            .zip(self.model.transforms())
            .map(|(&t, tr)| tr.to_external(t))
            .collect()
    }

    /// Residuals and, when requested, their analytic Jacobian.
    fn evaluate(&self, p: &DVector<f64>, with_jacobian: bool) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = p.len();
        let g = p[0].exp();
        let eta = Transform::Logistic.to_external(p[1]);
        let gamma = p[2].exp();
        if self.model == SpectrumModel::LockedZero && g >= 1.0 {
            return None;
        }
        let detuning_sq = match self.model {
            SpectrumModel::LockedShifted => g * g,
            SpectrumModel::LockedZero => 0.0,
            SpectrumModel::FreeDetuning => p[3],
        };
        let m = self.omega.len();
        let mut res = DVector::zeros(m);
        let mut jac = DMatrix::zeros(if with_jacobian { m } else { 0 }, n);
        for i in 0..m {
            let x = self.omega[i] / gamma;
            let grad = symmetric_gradient_detuning_sq(g, eta, detuning_sq, x).ok()?;
            let b = match self.branch[i] {
                Branch::Plus => grad.plus,
                Branch::Minus => grad.minus,
            };
            res[i] = b.value - self.variance[i];
            if with_jacobian {
                let d_gain = match self.model {
                    SpectrumModel::LockedShifted => b.d_gain + 2.0 * g * b.d_detuning_sq,
                    _ => b.d_gain,
                };
                jac[(i, 0)] = d_gain * g;
                jac[(i, 1)] = b.d_eta * eta * (1.0 - eta);
                jac[(i, 2)] = -b.d_omega * x;
                if n > 3 {
                    jac[(i, 3)] = b.d_detuning_sq;
                }
            }
        }
        if res.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((res, jac))
    }
}

impl LeastSquares for SpectrumProblem {
    fn residuals(&self, params: &DVector<f64>) -> Option<DVector<f64>> {
        self.evaluate(params, false).map(|(r, _)| r)
    }

    fn jacobian(&self, params: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.evaluate(params, true).map(|(_, j)| j)
    }
}

/// Invert the zero-sideband extremal variances for `(g, η)` under `model`.
fn invert_extremal(plus: f64, minus: f64, model: SpectrumModel) -> Option<(f64, f64)> {
    if !(plus > 1.0 && minus < 1.0) {
        return None;
    }
    let root = ((plus - 1.0) / (1.0 - minus)).sqrt();
    let (g, eta) = match model {
        SpectrumModel::LockedZero => {
            let g = (root - 1.0) / (root + 1.0);
            (g, (plus - 1.0) * (1.0 - g).powi(2) / (4.0 * g))
        }
        _ => {
            let g = 0.25 * (root - 1.0 / root);
            (g, (plus - 1.0) / (4.0 * g * (2.0 * g + (1.0 + 4.0 * g * g).sqrt())))
        }
    };
    (g > 0.0 && g.is_finite() && eta.is_finite()).then(|| (g, eta.clamp(0.02, 0.98)))
}

fn initial_guess(samples: &[SpectrumSample], model: SpectrumModel) -> Vec<f64> {
    let lowest = |branch: Branch| {
        samples
            .iter()
            .filter(|s| s.branch == branch)
            .min_by(|a, b| a.omega.total_cmp(&b.omega))
            .map(|s| (s.omega, from_db(s.v_db)))
    };
    let (g, eta) = match (lowest(Branch::Plus), lowest(Branch::Minus)) {
        (Some((_, p)), Some((_, m))) => invert_extremal(p, m, model).unwrap_or((0.3, 0.5)),
        _ => (0.3, 0.5),
    };
    let g = if model == SpectrumModel::LockedZero { g.min(0.95) } else { g };

    // Γ̄ from where the anti-squeezing excess halves
    let mut plus: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.branch == Branch::Plus)
        .map(|s| (s.omega, from_db(s.v_db) - 1.0))
        .collect();
    plus.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max_omega = samples.iter().map(|s| s.omega).fold(0.0, f64::max);
    let gamma = match plus.first() {
        Some(&(_, excess0)) if excess0 > 0.0 => match plus.iter().find(|(_, e)| *e < 0.5 * excess0) {
            Some(&(w, _)) => match model {
                SpectrumModel::LockedZero => w / (1.0 - g).max(0.05),
                _ => w / (2f64.sqrt() - 1.0).sqrt(),
            },
            None => 2.0 * max_omega,
        },
        _ => 2.0 * max_omega,
    }
    .max(f64::MIN_POSITIVE);

    let mut guess = vec![g, eta, gamma];
    if model == SpectrumModel::FreeDetuning {
        guess.push(g * g);
    }
    guess
}

fn validate_samples(samples: &[SpectrumSample], needed: usize) -> Result<()> {
    if samples.len() < needed {
        return Err(FitError::TooFewPoints {
            needed,
            got: samples.len(),
        });
    }
    if let Some(s) = samples.iter().find(|s| !(s.omega.is_finite() && s.omega >= 0.0 && s.v_db.is_finite())) {
        return Err(FitError::InvalidData(format!("bad spectrum sample {s:?}")));
    }
    Ok(())
}

fn result_from_outcome(
    outcome: &LmOutcome,
    names: &[&str],
    transforms: &[Transform],
    mut notes: Vec<String>,
) -> Result<FitResult> {
    let internal_se = internal_std_errors(&outcome.jacobian, &outcome.residuals, names)?;
    let values: Vec<f64> = outcome
        .params
        .iter()
        .zip(transforms)
        .map(|(&t, tr)| tr.to_external(t))
        .collect();
    let std_errors = outcome
        .params
        .iter()
        .zip(transforms)
        .zip(&internal_se)
        .map(|((&t, tr), se)| tr.derivative(t).abs() * se)
        .collect();
    for ((name, tr), v) in names.iter().zip(transforms).zip(&values) {
        if *tr == Transform::Logistic && !(1e-3..=1.0 - 1e-3).contains(v) {
            notes.push(format!("{name} at bound ({v:.6})"));
        }
    }
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        values,
        std_errors,
        residual_norm: outcome.residual_norm(),
        iterations: outcome.iterations,
        converged: true,
        notes,
    })
}

/// Both branches of a model spectrum as fit samples, with independent
/// Gaussian noise of `noise_db` standard deviation added to every value.
pub fn synthesize_samples(spectrum: &[SpectrumPoint], noise_db: f64, seed: u64) -> Result<Vec<SpectrumSample>> {
    if !(noise_db >= 0.0 && noise_db.is_finite()) {
        return Err(FitError::InvalidData(format!("noise level {noise_db} dB must be >= 0")));
    }
    let streams = Substreams::new(seed);
    let normal = Normal::new(0.0, noise_db).expect("validated noise level");
    Ok(spectrum
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            let mut rng = streams.stream(i as u64, Stage::Measurement);
            let mut draw = move || if noise_db > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            let plus = p.v_plus_db + draw();
            let minus = p.v_minus_db + draw();
            [
                SpectrumSample {
                    omega: p.omega,
                    v_db: plus,
                    branch: Branch::Plus,
                },
                SpectrumSample {
                    omega: p.omega,
                    v_db: minus,
                    branch: Branch::Minus,
                },
            ]
        })
        .collect())
}

/// Fit extremal-variance spectra (dB) to the closed-form model.
pub fn fit_spectrum(samples: &[SpectrumSample], model: SpectrumModel, config: &FitConfig) -> Result<FitResult> {
    let names = model.parameter_names();
    validate_samples(samples, names.len() + 1)?;
    let mut notes = vec![format!("model = {}", model.name())];
    let (lo, hi) = samples
        .iter()
        .filter(|s| s.omega > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s.omega), hi.max(s.omega)));
    if !(hi >= 10.0 * lo) {
        log::warn!("spectrum spans less than one decade of sideband frequency");
        notes.push("sideband span below one decade".into());
    }

    let problem = SpectrumProblem::new(samples, model);
    let guess = initial_guess(samples, model);
    let mut best: Option<LmOutcome> = None;
    let mut last_err = FitError::InvalidStart;
    for factor in [1.0, 0.3, 3.0] {
        let mut start = guess.clone();
        start[2] *= factor;
        match minimize(&problem, problem.to_internal(&start), config) {
            Ok(out) => {
                if best.as_ref().is_none_or(|b| out.residual_norm() < b.residual_norm()) {
                    best = Some(out);
                }
            }
            Err(e) => last_err = e,
        }
    }
    let outcome = best.ok_or(last_err)?;
    if model == SpectrumModel::FreeDetuning {
        let u = outcome.params[3];
        notes.push(match u > 0.0 {
            true => format!("|detuning_ratio| = {:.6}", u.sqrt()),
            false => format!("detuning_ratio_sq = {u:.3e} <= 0, data prefer zero detuning"),
        });
    }
    result_from_outcome(&outcome, names, model.transforms(), notes)
}

/// Extremal variances (dB) measured at pump power `power`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerVariancePoint {
    pub power: f64,
    pub v_plus_db: f64,
    pub v_minus_db: f64,
}

struct PowerProblem {
    power: Vec<f64>,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl LeastSquares for PowerProblem {
    fn residuals(&self, p: &DVector<f64>) -> Option<DVector<f64>> {
        let k = p[0].exp();
        let eta = Transform::Logistic.to_external(p[1]);
        let mut out = DVector::zeros(2 * self.power.len());
        for (i, &power) in self.power.iter().enumerate() {
            let (vp, vm) = extremal_variances(k * power, eta).ok()?;
            out[2 * i] = vp - self.plus[i];
            out[2 * i + 1] = vm - self.minus[i];
        }
        Some(out)
    }
}

/// Joint fit of both zero-sideband branches with `g = k·P`; returns `(eta, k)`.
pub fn fit_variance_vs_power(points: &[PowerVariancePoint], config: &FitConfig) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            got: points.len(),
        });
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.power >= 0.0 && p.power.is_finite() && p.v_plus_db.is_finite() && p.v_minus_db.is_finite()))
    {
        return Err(FitError::InvalidData(format!("bad power point {p:?}")));
    }
    let problem = PowerProblem {
        power: points.iter().map(|p| p.power).collect(),
        plus: points.iter().map(|p| from_db(p.v_plus_db)).collect(),
        minus: points.iter().map(|p| from_db(p.v_minus_db)).collect(),
    };
    let top = points.iter().max_by(|a, b| a.power.total_cmp(&b.power)).expect("non-empty");
    if !(top.power > 0.0) {
        return Err(FitError::InvalidData("all pump powers are zero".into()));
    }
    let (g, eta) = invert_extremal(from_db(top.v_plus_db), from_db(top.v_minus_db), SpectrumModel::LockedShifted)
        .unwrap_or((0.3, 0.5));
    let start = DVector::from_vec(vec![(g / top.power).ln(), Transform::Logistic.to_internal(eta)]);
    let outcome = minimize(&problem, start, config)?;
    let names = ["k", "eta"];
    let transforms = [Transform::Log, Transform::Logistic];
    let mut fit = result_from_outcome(&outcome, &names, &transforms, vec!["model = eq2, g = k*P".into()])?;
    // report in the conventional (eta, k) order
    fit.names.swap(0, 1);
    fit.values.swap(0, 1);
    fit.std_errors.swap(0, 1);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring_model::{symmetric_variances, to_db};
    use crate::estimation::numeric_jacobian;

    fn synth(g: f64, eta: f64, gamma: f64, model: SpectrumModel, n: usize) -> Vec<SpectrumSample> {
        let d = match model {
            SpectrumModel::LockedZero => 0.0,
            _ => g,
        };
        let grid = crate::ring_model::log_spaced(0.04 * gamma, 2.0 * gamma, n).unwrap();
        grid.iter()
            .flat_map(|&w| {
                let (p, m) = symmetric_variances(g, eta, d, w / gamma).unwrap();
                [
                    SpectrumSample { omega: w, v_db: to_db(p), branch: Branch::Plus },
                    SpectrumSample { omega: w, v_db: to_db(m), branch: Branch::Minus },
                ]
            })
            .collect()
    }

    #[test]
    fn noiseless_recovery_locked_shifted() {
        let gamma = 2.0 * std::f64::consts::PI * 4e8;
        let data = synth(0.45, 0.26, gamma, SpectrumModel::LockedShifted, 30);
        let fit = fit_spectrum(&data, SpectrumModel::LockedShifted, &FitConfig::default()).unwrap();
        for (name, truth) in [("gain", 0.45), ("eta", 0.26), ("dissipation", gamma)] {
            let v = fit.value(name).unwrap();
            assert!(((v - truth) / truth).abs() < 1e-6, "{name}: {v} vs {truth}");
        }
    }

    #[test]
    fn noiseless_recovery_locked_zero() {
        let data = synth(0.6, 0.5, 1.0e9, SpectrumModel::LockedZero, 25);
        let fit = fit_spectrum(&data, SpectrumModel::LockedZero, &FitConfig::default()).unwrap();
        assert!((fit.value("gain").unwrap() - 0.6).abs() < 1e-6);
        assert!((fit.value("eta").unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let data = synth(0.4, 0.3, 1.0e9, SpectrumModel::LockedShifted, 12);
        for model in [SpectrumModel::LockedShifted, SpectrumModel::LockedZero, SpectrumModel::FreeDetuning] {
            let problem = SpectrumProblem::new(&data, model);
            let mut phys = vec![0.35, 0.4, 1.3e9];
            if model == SpectrumModel::FreeDetuning {
                phys.push(0.04);
            }
            let p = problem.to_internal(&phys);
            let analytic = problem.jacobian(&p).unwrap();
            let numeric = numeric_jacobian(|q| problem.residuals(q), &p).unwrap();
            for (a, n) in analytic.iter().zip(numeric.iter()) {
                assert!((a - n).abs() <= 1e-6 * a.abs().max(1e-3), "{a} vs {n}");
            }
        }
    }

    #[test]
    fn too_few_points() {
        let data = synth(0.4, 0.3, 1.0e9, SpectrumModel::LockedShifted, 1);
        assert!(matches!(
            fit_spectrum(&data, SpectrumModel::LockedShifted, &FitConfig::default()),
            Err(FitError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn power_sweep_recovery() {
        let (eta, k) = (0.257, 0.45 / 40.0);
        let points: Vec<_> = [0.0, 5.0, 10.0, 20.0, 30.0, 40.0]
            .iter()
            .map(|&p| {
                let (vp, vm) = extremal_variances(k * p, eta).unwrap();
                PowerVariancePoint { power: p, v_plus_db: to_db(vp), v_minus_db: to_db(vm) }
            })
            .collect();
        assert_eq!((points[0].v_plus_db, points[0].v_minus_db), (0.0, 0.0));
        assert!(points.windows(2).all(|w| w[1].v_plus_db > w[0].v_plus_db));
        let fit = fit_variance_vs_power(&points, &FitConfig::default()).unwrap();
        assert_eq!(fit.names, vec!["eta", "k"]);
        assert!((fit.value("eta").unwrap() - eta).abs() < 1e-7);
        assert!((fit.value("k").unwrap() / k - 1.0).abs() < 1e-7);
    }
}
