//! Damped Gauss–Newton (Levenberg–Marquardt) with Marquardt diagonal scaling.

use nalgebra::{DMatrix, DVector};

use super::{FitConfig, FitError, Result};

/// A nonlinear least-squares problem in unconstrained coordinates.
pub trait LeastSquares {
    /// Residual vector, or `None` where the model cannot be evaluated.
    fn residuals(&self, params: &DVector<f64>) -> Option<DVector<f64>>;

    /// Residual Jacobian. Defaults to central differences.
    fn jacobian(&self, params: &DVector<f64>) -> Option<DMatrix<f64>> {
        numeric_jacobian(|p| self.residuals(p), params)
    }
}

/// Central-difference Jacobian with step `1e-6·max(|x|, 1)` per coordinate.
pub fn numeric_jacobian<F>(f: F, params: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let base = f(params)?;
    let mut jac = DMatrix::zeros(base.len(), params.len());
    let mut probe = params.clone();
    for j in 0..params.len() {
        let h = 1e-6 * params[j].abs().max(1.0);
        probe[j] = params[j] + h;
        let up = f(&probe)?;
        probe[j] = params[j] - h;
        let down = f(&probe)?;
        probe[j] = params[j];
        jac.set_column(j, &((up - down) / (2.0 * h)));
    }
    Some(jac)
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LmOutcome {
    pub fn residual_norm(&self) -> f64 {
        self.residuals.norm()
    }
}

/// Minimise `½‖r(x)‖²` from `start`.
///
/// Converges when `‖Jᵀr‖∞` drops below `config.gradient_tolerance`. If the
/// damping saturates first the point is accepted only when the gradient is
/// already at round-off level relative to the residual scale. With a nonzero
/// `cost_tolerance` a nearly undamped step that barely lowers the cost also
/// ends the search.
pub fn minimize<P: LeastSquares + ?Sized>(problem: &P, start: DVector<f64>, config: &FitConfig) -> Result<LmOutcome> {
    let mut x = start;
    let mut r = problem.residuals(&x).ok_or(FitError::InvalidStart)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut damping = config.initial_damping;
    let mut growth = 2.0;

    for iteration in 0..=config.max_iterations {
        let jac = problem.jacobian(&x).ok_or(FitError::InvalidStart)?;
        let grad = jac.transpose() * &r;
        let gnorm = grad.amax();
        if gnorm < config.gradient_tolerance || r.amax() < config.residual_tolerance {
            return Ok(LmOutcome {
                params: x,
                residuals: r,
                jacobian: jac,
                iterations: iteration,
                gradient_norm: gnorm,
            });
        }
        if iteration == config.max_iterations {
            break;
        }

        let normal = jac.transpose() * &jac;
        let max_diag = normal.diagonal().amax().max(f64::MIN_POSITIVE);
        let scale: DVector<f64> = normal.diagonal().map(|d| d.max(1e-12 * max_diag));

        let mut accepted = false;
        while damping < 1e20 {
            let mut system = normal.clone();
            for i in 0..x.len() {
                system[(i, i)] += damping * scale[i];
            }
            let Some(step) = system.cholesky().map(|c| c.solve(&(-&grad))) else {
                damping *= growth;
                growth *= 2.0;
                continue;
            };
            let candidate = &x + &step;
            let predicted = 0.5 * step.dot(&(damping * step.component_mul(&scale) - &grad));
            match problem.residuals(&candidate) {
                Some(r_new) if r_new.iter().all(|v| v.is_finite()) => {
                    let cost_new = 0.5 * r_new.norm_squared();
                    let rho = (cost - cost_new) / predicted.max(f64::MIN_POSITIVE);
                    if cost_new < cost && rho > 0.0 {
                        // a negligible gain from a nearly undamped step means we are at the bottom
                        let stalled = damping <= 1.0 && cost - cost_new <= config.cost_tolerance * cost;
                        x = candidate;
                        r = r_new;
                        cost = cost_new;
                        damping *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
                        damping = damping.max(1e-15);
                        growth = 2.0;
                        accepted = true;
                        if stalled {
                            let jac = problem.jacobian(&x).ok_or(FitError::InvalidStart)?;
                            let gradient_norm = (jac.transpose() * &r).amax();
                            return Ok(LmOutcome {
                                params: x,
                                residuals: r,
                                jacobian: jac,
                                iterations: iteration + 1,
                                gradient_norm,
                            });
                        }
                        break;
                    }
                }
                _ => {}
            }
            damping *= growth;
            growth *= 2.0;
        }

        if !accepted {
            // no descent step exists at working precision
            let tolerance = 1e-7 * (1.0 + jac.amax() * r.amax());
            if gnorm <= tolerance {
                log::debug!("lm stopped on damping saturation at |g| = {gnorm:e}");
                return Ok(LmOutcome {
                    params: x,
                    residuals: r,
                    jacobian: jac,
                    iterations: iteration,
                    gradient_norm: gnorm,
                });
            }
            return Err(FitError::NoConvergence {
                iterations: iteration,
                residual_norm: r.norm(),
                gradient_norm: gnorm,
            });
        }
    }
    Err(FitError::NoConvergence {
        iterations: config.max_iterations,
        residual_norm: r.norm(),
        gradient_norm: problem
            .jacobian(&x)
            .map(|j| (j.transpose() * &r).amax())
            .unwrap_or(f64::NAN),
    })
}
