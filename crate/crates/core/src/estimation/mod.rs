//! Least-squares estimators for the squeezing and photon-counting observables.
//!
//! Nonlinear fits run in an unconstrained space: efficiencies go through a
//! logistic map, positive scales through `ln`. Model fits compare variances
//! in linear units; dB conversion happens only when data enters.

mod lm;
mod spectrum;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub use lm::{minimize, numeric_jacobian, LeastSquares, LmOutcome};
pub use spectrum::{
    fit_spectrum, fit_variance_vs_power, synthesize_samples, Branch, PowerVariancePoint, SpectrumModel, SpectrumProblem,
    SpectrumSample,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least 2 subsets, got {0}")]
    TooFewSubsets(usize),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("model cannot be evaluated at the starting point")]
    InvalidStart,
    #[error("no convergence after {iterations} iterations (residual norm {residual_norm:e}, gradient {gradient_norm:e})")]
    NoConvergence {
        iterations: usize,
        residual_norm: f64,
        gradient_norm: f64,
    },
    #[error("normal equations are singular: parameters `{first}` and `{second}` are degenerate")]
    Conditioning { first: String, second: String },
}

pub type Result<T> = std::result::Result<T, FitError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Also stop once an accepted step lowers the cost by less than this
    /// fraction. Zero disables the test.
    pub cost_tolerance: f64,
    /// Also stop once every residual is within this of zero. Zero disables the test.
    pub residual_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 500,
            initial_damping: 1e-3,
            cost_tolerance: 0.0,
            residual_tolerance: 0.0,
        }
    }
}

/// Outcome of a nonlinear fit, in physical parameter units.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Model mode, bounds hit and similar decisions made during the fit.
    pub notes: Vec<String>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }
}

/// Map between a physical parameter and the unconstrained solver coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Transform {
    Identity,
    /// `x = e^θ`.
    Log,
    /// `x = 1/(1 + e^{−θ})`.
    Logistic,
}

impl Transform {
    pub(crate) fn to_internal(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logistic => (x / (1.0 - x)).ln(),
        }
    }

    pub(crate) fn to_external(self, t: f64) -> f64 {
        match self {
            Transform::Identity => t,
            Transform::Log => t.exp(),
            Transform::Logistic => 1.0 / (1.0 + (-t).exp()),
        }
    }

    /// `dx/dθ`.
    pub(crate) fn derivative(self, t: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log => t.exp(),
            Transform::Logistic => {
                let s = self.to_external(t);
                s * (1.0 - s)
            }
        }
    }
}

/// Residual-scaled standard errors of the internal parameters.
///
/// A (near-)singular `JᵀJ` is reported with the most correlated parameter pair.
pub(crate) fn internal_std_errors(jac: &DMatrix<f64>, residuals: &DVector<f64>, names: &[&str]) -> Result<Vec<f64>> {
    let (m, n) = jac.shape();
    let normal = jac.transpose() * jac;
    let diag = normal.diagonal();
    let worst_pair = |corr: &DMatrix<f64>| {
        let mut best = (0, 1.min(n - 1), -1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if corr[(i, j)].abs() > best.2 {
                    best = (i, j, corr[(i, j)].abs());
                }
            }
        }
        FitError::Conditioning {
            first: names[best.0].to_string(),
            second: names[best.1].to_string(),
        }
    };
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        let other = if i == 0 && n > 1 { 1 } else { 0 };
        return Err(FitError::Conditioning {
            first: names[i].to_string(),
            second: names[other].to_string(),
        });
    }
    let inv_sqrt = diag.map(|d| 1.0 / d.sqrt());
    let corr = DMatrix::from_fn(n, n, |i, j| normal[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(corr.clone());
    if eig.eigenvalues.min() < 1e-12 {
        return Err(worst_pair(&corr));
    }
    let corr_inv = corr.try_inverse().ok_or_else(|| worst_pair(&normal))?;
    let dof = m.saturating_sub(n).max(1) as f64;
    let sigma2 = residuals.norm_squared() / dof;
    Ok((0..n)
        .map(|i| (corr_inv[(i, i)] * inv_sqrt[i] * inv_sqrt[i] * sigma2).sqrt())
        .collect())
}

/// Per-subset values with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetStats {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn subset_stats(values: &[f64]) -> Result<SubsetStats> {
    if values.len() < 2 {
        return Err(FitError::TooFewSubsets(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(SubsetStats {
        values: values.to_vec(),
        mean,
        std: var.sqrt(),
    })
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub intercept_std_error: f64,
    pub points: usize,
}

pub fn ordinary_least_squares(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(FitError::InvalidData(format!("{} x values vs {} y values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(FitError::TooFewPoints { needed: 3, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::InvalidData("non-finite value".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FitError::Conditioning {
            first: "slope".into(),
            second: "intercept".into(),
        });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let s2 = ssr / (nf - 2.0);
    Ok(LinearFit {
        slope,
        intercept,
        slope_std_error: (s2 / sxx).sqrt(),
        intercept_std_error: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        points: n,
    })
}

/// Slope of `V_Δn` against `n_tot`, and the efficiency `η = 1 − slope` it implies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrfSlope {
    pub line: LinearFit,
    pub eta: f64,
    pub eta_std_error: f64,
}

/// Fit `V_Δn = slope·n_tot + intercept` over `(n_tot, V_Δn)` points.
pub fn fit_nrf_slope(points: &[(f64, f64)]) -> Result<NrfSlope> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let line = ordinary_least_squares(&x, &y)?;
    Ok(NrfSlope {
        line,
        eta: 1.0 - line.slope,
        eta_std_error: line.slope_std_error,
    })
}

/// Log–log slope of `n_tot` against pump power over `(P, n_tot)` points.
pub fn fit_power_scaling(points: &[(f64, f64)]) -> Result<LinearFit> {
    if let Some(&(p, n)) = points.iter().find(|(p, n)| !(*p > 0.0 && *n > 0.0)) {
        return Err(FitError::InvalidData(format!("non-positive point ({p}, {n}) in log-log fit")));
    }
    let x: Vec<f64> = points.iter().map(|(p, _)| p.ln()).collect();
    let y: Vec<f64> = points.iter().map(|(_, n)| n.ln()).collect();
    ordinary_least_squares(&x, &y)
}
