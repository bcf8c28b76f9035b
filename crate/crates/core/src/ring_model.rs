//! Closed-form spectral model of a microring squeezer driven below threshold.
//!
//! Device parameters map to a nonlinear coupling `Λ` and a dimensionless gain
//! `g = Λ|β̄_P|²/Γ̄`; the output-channel moments `N_x(Ω)` and `M_SI(Ω,−Ω)`
//! then give the quadrature variance seen by a bichromatic local oscillator.
//! Variances are normalised so that vacuum is 1.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative size of `|D|²` against the squared numerator scale below which a
/// moment denominator is treated as singular.
const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("invalid {name} = {value}: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("threshold singularity at g = {gain}, detuning = {detuning} rad/s, omega = {omega} rad/s")]
    Singular { gain: f64, detuning: f64, omega: f64 },
    #[error("drive is at or above the oscillation threshold (g = {gain}, detuning = {detuning} rad/s)")]
    AboveThreshold { gain: f64, detuning: f64 },
}

pub type Result<T> = std::result::Result<T, RingError>;

fn domain(name: &'static str, value: f64, reason: &'static str) -> RingError {
    RingError::Domain { name, value, reason }
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(domain(name, value, "must be finite and > 0"))
    }
}

fn require_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(domain(name, value, "must be finite and >= 0"))
    }
}

fn require_efficiency(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(domain(name, value, "must lie in [0, 1]"))
    }
}

/// Device parameters of the ring and its collection path.
///
/// Frequencies are angular (rad/s). Efficiencies are power transmissions.
#[derive(Debug, Clone, PartialEq)]
pub struct RingParams {
    pub loaded_q: f64,
    pub resonance_omega: f64,
    pub escape_efficiency_signal: f64,
    pub escape_efficiency_idler: f64,
    pub downstream_efficiency: f64,
    pub group_velocity: f64,
    /// Waveguide nonlinear parameter, (W·m)⁻¹.
    pub gamma_nl: f64,
    pub round_trip_length: f64,
    pub dissipation_signal: f64,
    pub dissipation_idler: f64,
}

impl RingParams {
    /// Symmetric ring with `Γ̄ = ω/(2Q)` on both modes and a silicon-nitride
    /// like waveguide (`v_g = c/2.1`, `γ_NL = 1 (W·m)⁻¹`, 120 µm radius).
    pub fn symmetric(
        loaded_q: f64,
        resonance_omega: f64,
        escape_efficiency: f64,
        downstream_efficiency: f64,
    ) -> Result<Self> {
        require_positive("loaded_q", loaded_q)?;
        require_positive("resonance_omega", resonance_omega)?;
        let dissipation = resonance_omega / (2.0 * loaded_q);
        let params = Self {
            loaded_q,
            resonance_omega,
            escape_efficiency_signal: escape_efficiency,
            escape_efficiency_idler: escape_efficiency,
            downstream_efficiency,
            group_velocity: SPEED_OF_LIGHT / 2.1,
            gamma_nl: 1.0,
            round_trip_length: 2.0 * std::f64::consts::PI * 120e-6,
            dissipation_signal: dissipation,
            dissipation_idler: dissipation,
        };
        params.validate()?;
        Ok(params)
    }

    /// Dissipation rate implied by the loaded quality factor, `ω/(2Q)`.
    pub fn dissipation_from_q(&self) -> f64 {
        self.resonance_omega / (2.0 * self.loaded_q)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("loaded_q", self.loaded_q)?;
        require_positive("resonance_omega", self.resonance_omega)?;
        require_efficiency("escape_efficiency_signal", self.escape_efficiency_signal)?;
        require_efficiency("escape_efficiency_idler", self.escape_efficiency_idler)?;
        require_efficiency("downstream_efficiency", self.downstream_efficiency)?;
        require_positive("group_velocity", self.group_velocity)?;
        require_nonnegative("gamma_nl", self.gamma_nl)?;
        require_positive("round_trip_length", self.round_trip_length)?;
        require_positive("dissipation_signal", self.dissipation_signal)?;
        require_positive("dissipation_idler", self.dissipation_idler)?;
        Ok(())
    }

    /// Effective `Γ̄` used in the gain: geometric mean of the two mode rates.
    pub fn mean_dissipation(&self) -> f64 {
        (self.dissipation_signal * self.dissipation_idler).sqrt()
    }

    /// Net collection efficiency of the signal arm (escape × downstream).
    pub fn total_efficiency_signal(&self) -> f64 {
        self.escape_efficiency_signal * self.downstream_efficiency
    }

    pub fn total_efficiency_idler(&self) -> f64 {
        self.escape_efficiency_idler * self.downstream_efficiency
    }
}

/// Effective detuning convention `Δ` of the driven signal/idler pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DetuningMode {
    /// `Δ = 0`.
    LockedZero,
    /// `Δ = gΓ̄`: pump follows its resonance as SPM/XPM shift it.
    #[default]
    LockedShifted,
    /// Explicit `Δ` in rad/s.
    Explicit(f64),
}

/// Classical intracavity pump.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpDrive {
    /// `|β̄_P|²`.
    pub intracavity_photons: f64,
    /// `Λ`, rad/s.
    pub coupling: f64,
    pub detuning: DetuningMode,
}

impl PumpDrive {
    pub fn new(intracavity_photons: f64, coupling: f64, detuning: DetuningMode) -> Result<Self> {
        let drive = Self {
            intracavity_photons,
            coupling,
            detuning,
        };
        drive.validate()?;
        Ok(drive)
    }

    /// Drive that realises gain `g` on `params` for a given coupling `Λ`.
    pub fn for_gain(gain: f64, coupling: f64, params: &RingParams, detuning: DetuningMode) -> Result<Self> {
        require_nonnegative("gain", gain)?;
        require_positive("coupling", coupling)?;
        params.validate()?;
        Self::new(gain * params.mean_dissipation() / coupling, coupling, detuning)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonnegative("intracavity_photons", self.intracavity_photons)?;
        require_nonnegative("coupling", self.coupling)?;
        if let DetuningMode::Explicit(d) = self.detuning {
            if !d.is_finite() {
                return Err(domain("detuning", d, "must be finite"));
            }
        }
        Ok(())
    }

    /// `Λ|β̄_P|²`, rad/s.
    fn pair_rate(&self) -> f64 {
        self.coupling * self.intracavity_photons
    }
}

/// `ω̄ = (ω_P² ω_S ω_I)^{1/4}`.
pub fn mean_frequency(pump: f64, signal: f64, idler: f64) -> f64 {
    (pump * pump * signal * idler).powf(0.25)
}

/// `Λ ≈ ħ ω̄ v_g² γ_NL / L` from waveguide quantities.
pub fn nonlinear_coupling(omega_bar: f64, group_velocity: f64, gamma_nl: f64, length: f64) -> Result<f64> {
    require_positive("omega_bar", omega_bar)?;
    require_positive("round_trip_length", length)?;
    require_nonnegative("group_velocity", group_velocity)?;
    require_nonnegative("gamma_nl", gamma_nl)?;
    Ok(HBAR * omega_bar * group_velocity * group_velocity * gamma_nl / length)
}

/// Nonlinear coupling `Λ` of a degenerate-frequency ring (`ω̄ = ω`).
pub fn lambda_coeff(params: &RingParams) -> Result<f64> {
    params.validate()?;
    nonlinear_coupling(
        params.resonance_omega,
        params.group_velocity,
        params.gamma_nl,
        params.round_trip_length,
    )
}

/// `g = Λ|β̄_P|²/Γ̄`. Not clamped: the `Δ = gΓ̄` branch stays below threshold for any g.
pub fn gain(params: &RingParams, drive: &PumpDrive) -> Result<f64> {
    drive.validate()?;
    let gamma = params.mean_dissipation();
    require_positive("dissipation", gamma)?;
    let g = drive.pair_rate() / gamma;
    if !g.is_finite() {
        return Err(domain("gain", g, "must be finite"));
    }
    Ok(g)
}

/// Resonator dwell time `2Q/ω̄`, seconds.
pub fn dwell_time(params: &RingParams) -> Result<f64> {
    require_positive("loaded_q", params.loaded_q)?;
    require_positive("resonance_omega", params.resonance_omega)?;
    Ok(2.0 * params.loaded_q / params.resonance_omega)
}

/// Effective detuning `Δ` in rad/s for this drive.
pub fn detuning(params: &RingParams, drive: &PumpDrive) -> Result<f64> {
    Ok(match drive.detuning {
        DetuningMode::LockedZero => 0.0,
        DetuningMode::LockedShifted => gain(params, drive)? * params.mean_dissipation(),
        DetuningMode::Explicit(d) => d,
    })
}

/// Output-channel moments at sideband `Ω` (after downstream loss).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSpectrum {
    pub omega: f64,
    /// `N_S(Ω,Ω)`.
    pub n_signal: f64,
    /// `N_I(Ω,Ω)`.
    pub n_idler: f64,
    /// `M_SI(Ω,−Ω)`.
    pub m_si: Complex64,
}

/// One point of the phase-dependent quadrature variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariancePoint {
    pub omega: f64,
    /// `φ_S + φ_I`, rad.
    pub phase_sum: f64,
    pub variance: f64,
}

impl VariancePoint {
    pub fn variance_db(&self) -> f64 {
        to_db(self.variance)
    }
}

/// Model curve sample: phase-extremised variances in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub v_plus_db: f64,
    pub v_minus_db: f64,
}

/// `10·log10(V)`.
pub fn to_db(variance: f64) -> f64 {
    10.0 * variance.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Everything the closed forms need, resolved once per (params, drive).
struct Resolved {
    gain: f64,
    detuning: f64,
    pair_rate: f64,
    gamma_s: f64,
    gamma_i: f64,
    eta_s: f64,
    eta_i: f64,
    eta_dn: f64,
}

impl Resolved {
    fn new(params: &RingParams, drive: &PumpDrive) -> Result<Self> {
        params.validate()?;
        let gain = gain(params, drive)?;
        let detuning = detuning(params, drive)?;
        let r = Self {
            gain,
            detuning,
            pair_rate: drive.pair_rate(),
            gamma_s: params.dissipation_signal,
            gamma_i: params.dissipation_idler,
            eta_s: params.escape_efficiency_signal,
            eta_i: params.escape_efficiency_idler,
            eta_dn: params.downstream_efficiency,
        };
        r.check_stable()?;
        Ok(r)
    }

    /// `Γ̃_x* = Γ̄_x + iΔ`.
    fn tilde_conj(&self, gamma: f64) -> Complex64 {
        Complex64::new(gamma, self.detuning)
    }

    /// Eigenvalues of the signal/idler-conjugate drift matrix must have negative real part.
    fn check_stable(&self) -> Result<()> {
        let gs = Complex64::new(self.gamma_s, -self.detuning);
        let gi_conj = self.tilde_conj(self.gamma_i);
        let p2 = self.pair_rate * self.pair_rate;
        let trace = -(gs + gi_conj);
        let det = gs * gi_conj - p2;
        let disc = (trace * trace - 4.0 * det).sqrt();
        let max_re = ((trace + disc) * 0.5).re.max(((trace - disc) * 0.5).re);
        if max_re >= -SINGULAR_TOLERANCE * self.gamma_s.max(self.gamma_i) {
            // exactly on threshold is reported as a singularity at Ω = 0
            if (det).norm() <= SINGULAR_TOLERANCE.sqrt() * (p2 + self.gamma_s * self.gamma_i) {
                return Err(self.singular(0.0));
            }
            return Err(RingError::AboveThreshold {
                gain: self.gain,
                detuning: self.detuning,
            });
        }
        Ok(())
    }

    fn singular(&self, omega: f64) -> RingError {
        RingError::Singular {
            gain: self.gain,
            detuning: self.detuning,
            omega,
        }
    }

    /// `N_S(Ω,Ω)`, `N_I(Ω,Ω)` and `M_SI(Ω,−Ω)` at escape level (no downstream loss).
    fn raw_moments(&self, omega: f64) -> Result<(f64, f64, Complex64)> {
        let iw = Complex64::new(0.0, omega);
        let gs = Complex64::new(self.gamma_s, -self.detuning);
        let gs_conj = self.tilde_conj(self.gamma_s);
        let gi_conj = self.tilde_conj(self.gamma_i);
        let p = self.pair_rate;
        let p2 = p * p;

        let left = gi_conj - iw;
        let right = gs - iw;
        let denom = Complex64::from(p2) - left * right;
        let denom_sq = denom.norm_sqr();
        let scale = p2 + left.norm() * right.norm();
        if !(denom_sq > SINGULAR_TOLERANCE * scale * scale) {
            return Err(self.singular(omega));
        }

        let common = 4.0 * self.gamma_s * self.gamma_i * p2 / denom_sq;
        let n_s = self.eta_s * common;
        let n_i = self.eta_i * common;
        let prefactor = 2.0 * (self.eta_s * self.gamma_s * self.eta_i * self.gamma_i).sqrt() * p;
        let m_si = prefactor * (Complex64::from(p2) + (gs_conj + iw) * (gi_conj - iw)) / denom_sq;
        Ok((n_s, n_i, m_si))
    }
}

fn moments_resolved(r: &Resolved, omega: f64) -> Result<MomentSpectrum> {
    let (n_s, n_i, m_si) = r.raw_moments(omega)?;
    Ok(MomentSpectrum {
        omega,
        n_signal: r.eta_dn * n_s,
        n_idler: r.eta_dn * n_i,
        m_si: r.eta_dn * m_si,
    })
}

/// Photon-flux and pair-correlation moments of the output channel at `Ω`.
///
/// The escape efficiencies enter the closed forms directly; downstream loss
/// scales `N` and `M` afterwards.
pub fn moment_spectrum(params: &RingParams, drive: &PumpDrive, omega: f64) -> Result<MomentSpectrum> {
    if !omega.is_finite() {
        return Err(domain("omega", omega, "must be finite"));
    }
    let r = Resolved::new(params, drive)?;
    moments_resolved(&r, omega)
}

/// `N̄(Ω,Ω) + N̄(−Ω,−Ω)` and `M̄(Ω,−Ω)`.
///
/// `M_IS(Ω,−Ω)` is taken as `M_SI(−Ω,Ω)`; the two coincide for equal mode
/// rates and this keeps the assembled variance exact when they differ.
fn variance_terms(r: &Resolved, omega: f64) -> Result<(f64, Complex64)> {
    let plus = moments_resolved(r, omega)?;
    let minus = moments_resolved(r, -omega)?;
    let n_sum = 0.5 * (plus.n_signal + plus.n_idler) + 0.5 * (minus.n_signal + minus.n_idler);
    let m_bar = 0.5 * (plus.m_si + minus.m_si);
    Ok((n_sum, m_bar))
}

/// Quadrature variance for local-oscillator phases `φ_S`, `φ_I` at sideband `Ω`.
pub fn quadrature_variance(
    params: &RingParams,
    drive: &PumpDrive,
    phase_signal: f64,
    phase_idler: f64,
    omega: f64,
) -> Result<VariancePoint> {
    let r = Resolved::new(params, drive)?;
    let (n_sum, m_bar) = variance_terms(&r, omega)?;
    let phase_sum = phase_signal + phase_idler;
    let rotated = Complex64::from_polar(1.0, -phase_sum) * m_bar;
    Ok(VariancePoint {
        omega,
        phase_sum,
        variance: 1.0 + n_sum + 2.0 * rotated.re,
    })
}

/// Maximum and minimum over `φ_S + φ_I` of the quadrature variance at `Ω`.
pub fn phase_extremal_variances(params: &RingParams, drive: &PumpDrive, omega: f64) -> Result<(f64, f64)> {
    let r = Resolved::new(params, drive)?;
    extremal_resolved(&r, omega)
}

fn extremal_resolved(r: &Resolved, omega: f64) -> Result<(f64, f64)> {
    let (n_sum, m_bar) = variance_terms(r, omega)?;
    let swing = 2.0 * m_bar.norm();
    Ok((1.0 + n_sum + swing, 1.0 + n_sum - swing))
}

/// `φ_S + φ_I` at which the variance is maximal (minimum lies π away).
pub fn antisqueezing_phase(params: &RingParams, drive: &PumpDrive, omega: f64) -> Result<f64> {
    let r = Resolved::new(params, drive)?;
    let (_, m_bar) = variance_terms(&r, omega)?;
    Ok(m_bar.arg())
}

/// Extremal variances `V± = 1 + 4ηg(2g ± √(1+4g²))` at `Ω = 0`, `Δ = gΓ̄`.
pub fn extremal_variances(gain: f64, eta: f64) -> Result<(f64, f64)> {
    require_nonnegative("gain", gain)?;
    require_efficiency("eta", eta)?;
    let root = (1.0 + 4.0 * gain * gain).sqrt();
    let plus = 1.0 + 4.0 * eta * gain * (2.0 * gain + root);
    // 2g − √(1+4g²) = −1/(2g + √(1+4g²)), avoids cancellation at large g
    let minus = 1.0 - 4.0 * eta * gain / (2.0 * gain + root);
    Ok((plus, minus))
}

/// Extremal variances for `Δ = 0`: `V± = 1 ± 4gη/((1∓g)² + (Ω/Γ̄)²)`.
pub fn variances_delta_zero(gain: f64, eta: f64, omega_ratio: f64) -> Result<(f64, f64)> {
    require_nonnegative("gain", gain)?;
    require_efficiency("eta", eta)?;
    if !omega_ratio.is_finite() {
        return Err(domain("omega_ratio", omega_ratio, "must be finite"));
    }
    let x2 = omega_ratio * omega_ratio;
    let plus_den = (1.0 - gain).powi(2) + x2;
    if gain >= 1.0 && omega_ratio == 0.0 || plus_den <= SINGULAR_TOLERANCE {
        return Err(RingError::Singular {
            gain,
            detuning: 0.0,
            omega: omega_ratio,
        });
    }
    let minus_den = (1.0 + gain).powi(2) + x2;
    Ok((1.0 + 4.0 * gain * eta / plus_den, 1.0 - 4.0 * gain * eta / minus_den))
}

/// Phase-extremised variances for equal signal/idler rates and efficiencies,
/// in units of `Γ̄`: `detuning_ratio = Δ/Γ̄`, `omega_ratio = Ω/Γ̄`.
pub fn symmetric_variances(gain: f64, eta: f64, detuning_ratio: f64, omega_ratio: f64) -> Result<(f64, f64)> {
    let grad = symmetric_variances_with_gradient(gain, eta, detuning_ratio, omega_ratio)?;
    Ok((grad.plus.value, grad.minus.value))
}

/// Value of one extremal branch and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchGradient {
    pub value: f64,
    pub d_gain: f64,
    pub d_eta: f64,
    pub d_detuning: f64,
    /// With respect to `(Δ/Γ̄)²`.
    pub d_detuning_sq: f64,
    pub d_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricGradient {
    pub plus: BranchGradient,
    pub minus: BranchGradient,
}

/// [`symmetric_variances`] together with analytic partial derivatives with
/// respect to `g`, `η`, `Δ/Γ̄` and `Ω/Γ̄`.
pub fn symmetric_variances_with_gradient(
    gain: f64,
    eta: f64,
    detuning_ratio: f64,
    omega_ratio: f64,
) -> Result<SymmetricGradient> {
    if !detuning_ratio.is_finite() {
        return Err(domain("detuning_ratio", detuning_ratio, "must be finite"));
    }
    let mut grad = symmetric_gradient_detuning_sq(gain, eta, detuning_ratio * detuning_ratio, omega_ratio)?;
    for b in [&mut grad.plus, &mut grad.minus] {
        b.d_detuning = 2.0 * detuning_ratio * b.d_detuning_sq;
    }
    Ok(grad)
}

/// Same variances parameterised by `u = (Δ/Γ̄)²`. The extremal variances
/// depend on the detuning only through `u`, so this form stays smooth at
/// `Δ = 0`. Negative `u` continues the expressions analytically as long as
/// they remain real; `d_detuning` is left at zero.
pub fn symmetric_gradient_detuning_sq(
    gain: f64,
    eta: f64,
    detuning_sq: f64,
    omega_ratio: f64,
) -> Result<SymmetricGradient> {
    require_nonnegative("gain", gain)?;
    require_efficiency("eta", eta)?;
    if !detuning_sq.is_finite() || !omega_ratio.is_finite() {
        return Err(domain("detuning/omega ratio", detuning_sq + omega_ratio, "must be finite"));
    }
    let (g, u, x) = (gain, detuning_sq, omega_ratio);
    let singular = || RingError::Singular {
        gain,
        detuning: u.max(0.0).sqrt(),
        omega: omega_ratio,
    };

    // B = (Γ̃*/Γ̄)² + g² + x², |B|² = Re(B)² + 4u; E = g² − |Γ̃|²/Γ̄² + x², den = E² + 4x²
    let br = 1.0 - u + g * g + x * x;
    let b_sq = br * br + 4.0 * u;
    if b_sq <= 0.0 {
        return Err(singular());
    }
    let b_abs = b_sq.sqrt();
    let e = g * g - 1.0 - u + x * x;
    let den = e * e + 4.0 * x * x;
    if den <= SINGULAR_TOLERANCE * (1.0 + g * g + u.abs() + x * x).powi(2) {
        return Err(singular());
    }

    let db_dg = br * 2.0 * g / b_abs;
    let db_du = (2.0 - br) / b_abs;
    let db_dx = br * 2.0 * x / b_abs;
    let dden_dg = 2.0 * e * 2.0 * g;
    let dden_du = -2.0 * e;
    let dden_dx = 2.0 * e * 2.0 * x + 8.0 * x;

    let branch = |sign: f64| {
        let a = 2.0 * g + sign * b_abs;
        let f = 4.0 * eta * g * a / den;
        let da_dg = 2.0 + sign * db_dg;
        let da_du = sign * db_du;
        let da_dx = sign * db_dx;
        BranchGradient {
            value: 1.0 + f,
            d_gain: 4.0 * eta * (a + g * da_dg) / den - f * dden_dg / den,
            d_eta: 4.0 * g * a / den,
            d_detuning: 0.0,
            d_detuning_sq: 4.0 * eta * g * da_du / den - f * dden_du / den,
            d_omega: 4.0 * eta * g * da_dx / den - f * dden_dx / den,
        }
    };
    Ok(SymmetricGradient {
        plus: branch(1.0),
        minus: branch(-1.0),
    })
}

/// Phase-extremised variance spectrum in dB over `omega_grid` (rad/s).
pub fn squeezing_spectrum(params: &RingParams, drive: &PumpDrive, omega_grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let r = Resolved::new(params, drive)?;
    omega_grid
        .par_iter()
        .map(|&omega| {
            if !omega.is_finite() {
                return Err(domain("omega", omega, "must be finite"));
            }
            let (plus, minus) = extremal_resolved(&r, omega)?;
            Ok(SpectrumPoint {
                omega,
                v_plus_db: to_db(plus),
                v_minus_db: to_db(minus),
            })
        })
        .collect()
}

/// `n` logarithmically spaced values from `start` to `stop` inclusive.
pub fn log_spaced(start: f64, stop: f64, n: usize) -> Result<Vec<f64>> {
    require_positive("start", start)?;
    require_positive("stop", stop)?;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![start]),
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            Ok((0..n)
                .map(|k| {
                    if k == 0 {
                        start
                    } else if k == n - 1 {
                        stop
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ring(eta_esc: f64, eta_dn: f64) -> RingParams {
        RingParams::symmetric(8e5, 1.216e15, eta_esc, eta_dn).unwrap()
    }

    fn drive(params: &RingParams, g: f64, mode: DetuningMode) -> PumpDrive {
        PumpDrive::for_gain(g, 1.0, params, mode).unwrap()
    }

    #[test]
    fn lambda_zero_without_nonlinearity() {
        assert_eq!(nonlinear_coupling(1e15, 0.0, 1.0, 1e-3).unwrap(), 0.0);
        assert_eq!(nonlinear_coupling(1e15, 1e8, 0.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn lambda_scales_inversely_with_length() {
        let a = nonlinear_coupling(1.2e15, 1.4e8, 1.0, 1e-3).unwrap();
        let b = nonlinear_coupling(1.2e15, 1.4e8, 1.0, 2e-3).unwrap();
        assert_relative_eq!(b, a / 2.0, max_relative = 1e-15);
        assert!(nonlinear_coupling(1.2e15, 1.4e8, 1.0, 0.0).is_err());
        assert!(nonlinear_coupling(1.2e15, 1.4e8, 1.0, -1.0).is_err());
    }

    #[test]
    fn lambda_for_reference_ring() {
        // ħ ω v² γ / L by hand: 1.054571817e-34 · 1.216e15 · (c/2.1)² / (2π·120e-6)
        let v = SPEED_OF_LIGHT / 2.1;
        let expected = 1.054571817e-34 * 1.216e15 * v * v / (2.0 * PI * 120e-6);
        let params = ring(0.75, 1.0);
        let lambda = lambda_coeff(&params).unwrap();
        assert_relative_eq!(lambda, expected, max_relative = 1e-12);
        assert!((lambda - 3.466).abs() < 0.01, "lambda = {lambda}");
        let photons = 0.45 * params.mean_dissipation() / lambda;
        let d = PumpDrive::new(photons, lambda, DetuningMode::LockedShifted).unwrap();
        assert_relative_eq!(gain(&params, &d).unwrap(), 0.45, max_relative = 1e-12);
    }

    #[test]
    fn mean_frequency_degenerate() {
        assert_relative_eq!(mean_frequency(2.0, 2.0, 2.0), 2.0, max_relative = 1e-15);
        assert_relative_eq!(mean_frequency(1.0, 0.5, 2.0), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn gain_arithmetic() {
        let mut params = ring(1.0, 1.0);
        params.dissipation_signal = 1.0;
        params.dissipation_idler = 1.0;
        let d = PumpDrive::new(450.0, 1e-3, DetuningMode::LockedShifted).unwrap();
        assert_relative_eq!(gain(&params, &d).unwrap(), 0.45, max_relative = 1e-12);
        let d2 = PumpDrive::new(900.0, 1e-3, DetuningMode::LockedShifted).unwrap();
        assert_relative_eq!(gain(&params, &d2).unwrap(), 0.9, max_relative = 1e-12);
        let zero = PumpDrive::new(0.0, 1e-3, DetuningMode::LockedShifted).unwrap();
        assert_eq!(gain(&params, &zero).unwrap(), 0.0);
        params.dissipation_signal = 0.0;
        assert!(gain(&params, &d).is_err());
    }

    #[test]
    fn dwell_time_reference() {
        let params = ring(0.8, 1.0);
        let tau = dwell_time(&params).unwrap();
        assert!((tau - 1.3158e-9).abs() < 1e-12, "tau = {tau}");
        let mut doubled = params.clone();
        doubled.loaded_q *= 2.0;
        assert_relative_eq!(dwell_time(&doubled).unwrap(), 2.0 * tau, max_relative = 1e-15);
        let mut bad = params;
        bad.loaded_q = 0.0;
        assert!(dwell_time(&bad).is_err());
    }

    #[test]
    fn vacuum_without_pump() {
        let params = ring(0.75, 0.5);
        let d = PumpDrive::new(0.0, 3.0, DetuningMode::LockedShifted).unwrap();
        let m = moment_spectrum(&params, &d, 1e8).unwrap();
        assert_eq!(m.n_signal, 0.0);
        assert_eq!(m.n_idler, 0.0);
        assert_eq!(m.m_si, Complex64::new(0.0, 0.0));
        for phase in [0.0, 0.7, 2.0] {
            let v = quadrature_variance(&params, &d, phase, 0.3, 5e8).unwrap();
            assert_eq!(v.variance, 1.0);
        }
    }

    #[test]
    fn lorentzian_rolloff() {
        let params = ring(1.0, 1.0);
        let d = drive(&params, 0.4, DetuningMode::LockedShifted);
        let m = moment_spectrum(&params, &d, 1e6 * params.mean_dissipation()).unwrap();
        assert!(m.n_signal < 1e-10 && m.m_si.norm() < 1e-5);
    }

    #[test]
    fn symmetric_moments_match_eq2() {
        let params = ring(0.7, 1.0);
        for g in [0.1, 0.5, 1.3] {
            let d = drive(&params, g, DetuningMode::LockedShifted);
            let (plus, minus) = phase_extremal_variances(&params, &d, 0.0).unwrap();
            let (p2, m2) = extremal_variances(g, 0.7).unwrap();
            assert_relative_eq!(plus, p2, max_relative = 1e-9);
            assert_relative_eq!(minus, m2, max_relative = 1e-9);
        }
    }

    #[test]
    fn pair_symmetry_of_fluxes() {
        let params = ring(0.6, 0.9);
        let d = drive(&params, 0.3, DetuningMode::Explicit(2e8));
        let m = moment_spectrum(&params, &d, 3e8).unwrap();
        assert_eq!(m.n_signal, m.n_idler);
    }

    #[test]
    fn downstream_loss_scales_moments() {
        let full = ring(0.8, 1.0);
        let lossy = ring(0.8, 0.25);
        let d = drive(&full, 0.3, DetuningMode::LockedShifted);
        let a = moment_spectrum(&full, &d, 2e8).unwrap();
        let b = moment_spectrum(&lossy, &d, 2e8).unwrap();
        assert_relative_eq!(b.n_signal, 0.25 * a.n_signal, max_relative = 1e-14);
        assert_relative_eq!(b.m_si.re, 0.25 * a.m_si.re, max_relative = 1e-12);
    }

    #[test]
    fn threshold_is_reported() {
        let params = ring(1.0, 1.0);
        let d = drive(&params, 1.0, DetuningMode::LockedZero);
        assert!(matches!(
            moment_spectrum(&params, &d, 0.0),
            Err(RingError::Singular { .. })
        ));
        let above = drive(&params, 1.2, DetuningMode::LockedZero);
        assert!(matches!(
            moment_spectrum(&params, &above, 1e8),
            Err(RingError::AboveThreshold { .. })
        ));
        // the SPM-tracking branch is never above threshold
        let shifted = drive(&params, 3.0, DetuningMode::LockedShifted);
        assert!(moment_spectrum(&params, &shifted, 0.0).is_ok());
    }

    #[test]
    fn extremal_examples() {
        assert_eq!(extremal_variances(0.0, 0.4).unwrap(), (1.0, 1.0));
        let (p, m) = extremal_variances(0.5, 1.0).unwrap();
        assert!((p - 5.8284).abs() < 1e-4 && (m - 0.1716).abs() < 1e-4);
        assert_relative_eq!(p * m, 1.0, max_relative = 1e-12);
        assert!(extremal_variances(-0.1, 0.5).is_err());
        assert!(extremal_variances(0.1, 1.5).is_err());
    }

    #[test]
    fn delta_zero_examples() {
        let (p, m) = variances_delta_zero(0.5, 1.0, 0.0).unwrap();
        assert_relative_eq!(p, 9.0, max_relative = 1e-12);
        assert_relative_eq!(m, 1.0 / 9.0, max_relative = 1e-12);
        let (p, _) = variances_delta_zero(0.9, 1.0, 0.0).unwrap();
        assert_relative_eq!(p, 361.0, max_relative = 1e-10);
        let (p, m) = variances_delta_zero(0.5, 1.0, 1e9).unwrap();
        assert!((p - 1.0).abs() < 1e-15 && (m - 1.0).abs() < 1e-15);
        assert!(variances_delta_zero(1.0, 1.0, 0.0).is_err());
        assert!(variances_delta_zero(1.3, 1.0, 0.0).is_err());
    }

    #[test]
    fn delta_zero_agrees_with_moments() {
        let params = ring(1.0, 1.0);
        let gamma = params.mean_dissipation();
        for (g, x) in [(0.5, 0.0), (0.9, 0.0), (0.3, 0.7)] {
            let d = drive(&params, g, DetuningMode::LockedZero);
            let (plus, minus) = phase_extremal_variances(&params, &d, x * gamma).unwrap();
            let (p2, m2) = variances_delta_zero(g, 1.0, x).unwrap();
            assert_relative_eq!(plus, p2, max_relative = 1e-9);
            assert_relative_eq!(minus, m2, max_relative = 1e-9);
        }
    }

    #[test]
    fn symmetric_closed_form_matches_moments() {
        let params = ring(0.8, 0.6);
        let gamma = params.mean_dissipation();
        let eta = params.total_efficiency_signal();
        for (g, d, x) in [(0.2, 0.5, 0.3), (0.6, -0.4, 1.5), (0.45, 0.45, 0.0)] {
            let dr = drive(&params, g, DetuningMode::Explicit(d * gamma));
            let (plus, minus) = phase_extremal_variances(&params, &dr, x * gamma).unwrap();
            let (p2, m2) = symmetric_variances(g, eta, d, x).unwrap();
            assert_relative_eq!(plus, p2, max_relative = 1e-10);
            assert_relative_eq!(minus, m2, max_relative = 1e-10);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (g, eta, d, x) = (0.37, 0.62, 0.21, 0.8);
        let grad = symmetric_variances_with_gradient(g, eta, d, x).unwrap();
        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> (f64, f64), at: f64| {
            let (p1, m1) = f(at + h);
            let (p0, m0) = f(at - h);
            ((p1 - p0) / (2.0 * h), (m1 - m0) / (2.0 * h))
        };
        let checks = [
            (fd(&|v| symmetric_variances(v, eta, d, x).unwrap(), g), grad.plus.d_gain, grad.minus.d_gain),
            (fd(&|v| symmetric_variances(g, v, d, x).unwrap(), eta), grad.plus.d_eta, grad.minus.d_eta),
            (fd(&|v| symmetric_variances(g, eta, v, x).unwrap(), d), grad.plus.d_detuning, grad.minus.d_detuning),
            (fd(&|v| symmetric_variances(g, eta, d, v).unwrap(), x), grad.plus.d_omega, grad.minus.d_omega),
        ];
        for ((fp, fm), ap, am) in checks {
            assert_relative_eq!(fp, ap, max_relative = 1e-6);
            assert_relative_eq!(fm, am, max_relative = 1e-6);
        }
    }

    #[test]
    fn squared_detuning_derivative_is_smooth_at_zero() {
        let (g, eta, x) = (0.45, 0.3, 0.4);
        let val = |u: f64| {
            let b = symmetric_gradient_detuning_sq(g, eta, u, x).unwrap();
            (b.plus.value, b.minus.value)
        };
        let h = 1e-6;
        let at_zero = symmetric_gradient_detuning_sq(g, eta, 0.0, x).unwrap();
        assert_relative_eq!((val(h).1 - val(-h).1) / (2.0 * h), at_zero.minus.d_detuning_sq, max_relative = 1e-6);
        assert!(at_zero.minus.d_detuning_sq.abs() > 1e-3);
        let (p, m) = symmetric_variances(g, eta, 0.3, x).unwrap();
        let (p2, m2) = val(0.09);
        assert_relative_eq!(p, p2, max_relative = 1e-12);
        assert_relative_eq!(m, m2, max_relative = 1e-12);
    }

    #[test]
    fn phase_sum_dependence_only() {
        let params = ring(0.7, 0.8);
        let d = drive(&params, 0.4, DetuningMode::LockedShifted);
        let a = quadrature_variance(&params, &d, 0.3, 0.9, 1e8).unwrap();
        let b = quadrature_variance(&params, &d, 1.1, 0.1, 1e8).unwrap();
        assert_relative_eq!(a.variance, b.variance, max_relative = 1e-13);
        let peak = antisqueezing_phase(&params, &d, 1e8).unwrap();
        let (plus, minus) = phase_extremal_variances(&params, &d, 1e8).unwrap();
        let at_peak = quadrature_variance(&params, &d, peak, 0.0, 1e8).unwrap();
        let at_trough = quadrature_variance(&params, &d, peak + PI, 0.0, 1e8).unwrap();
        assert_relative_eq!(at_peak.variance, plus, max_relative = 1e-12);
        assert_relative_eq!(at_trough.variance, minus, max_relative = 1e-12);
    }

    #[test]
    fn flat_spectrum_without_gain() {
        let params = ring(0.75, 0.34);
        let d = PumpDrive::new(0.0, 1.0, DetuningMode::LockedShifted).unwrap();
        let grid = log_spaced(2e7 * 2.0 * PI, 1e9 * 2.0 * PI, 10).unwrap();
        for p in squeezing_spectrum(&params, &d, &grid).unwrap() {
            assert_eq!(p.v_plus_db, 0.0);
            assert_eq!(p.v_minus_db, 0.0);
        }
    }

    #[test]
    fn higher_efficiency_deepens_squeezing() {
        let grid = [1e8, 1e9];
        let lo = ring(0.5, 0.5);
        let hi = ring(0.9, 0.9);
        let d = drive(&lo, 0.4, DetuningMode::LockedShifted);
        let a = squeezing_spectrum(&lo, &d, &grid).unwrap();
        let b = squeezing_spectrum(&hi, &d, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(y.v_minus_db < x.v_minus_db);
        }
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_spaced(20e6, 1e9, 50).unwrap();
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], 20e6);
        assert_eq!(g[49], 1e9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
