use std::io::Write;

use sqz_core::estimation::{synthesize_samples, Branch};
use sqz_core::ring_model::{self, lambda_coeff, log_spaced, squeezing_spectrum};
use sqz_core::{DetuningMode, PumpDrive, RingParams};

use super::Context;
use crate::config::Config;
use crate::error::CliError;

/// Ring parameters from `[ring]`. Frequencies in Hz.
pub fn ring_params(config: &Config) -> Result<RingParams, CliError> {
    let s = config.section("ring");
    let resonance = s
        .angular_hz("resonance_hz")?
        .ok_or_else(|| CliError::Config("missing required key [ring] resonance_hz".into()))?;
    let escape: Option<f64> = s.get("escape_efficiency")?;
    let esc_s = s.get("escape_efficiency_signal")?.or(escape);
    let esc_i = s.get("escape_efficiency_idler")?.or(escape);
    let (Some(esc_s), Some(esc_i)) = (esc_s, esc_i) else {
        return Err(CliError::Config("set [ring] escape_efficiency (or _signal and _idler)".into()));
    };
    let downstream = s.get_or("downstream_efficiency", 1.0)?;
    let loaded_q: Option<f64> = s.get("loaded_q")?;
    let dissipation = s.angular_hz("dissipation_hz")?;
    let q = match (loaded_q, dissipation) {
        (Some(q), _) => q,
        (None, Some(d)) => resonance / (2.0 * d),
        (None, None) => return Err(CliError::Config("set [ring] loaded_q or dissipation_hz".into())),
    };
    let mut p = RingParams::symmetric(q, resonance, esc_s, downstream)?;
    p.escape_efficiency_idler = esc_i;
    if let Some(d) = dissipation {
        p.dissipation_signal = d;
        p.dissipation_idler = d;
    }
    if let Some(d) = s.angular_hz("dissipation_signal_hz")? {
        p.dissipation_signal = d;
    }
    if let Some(d) = s.angular_hz("dissipation_idler_hz")? {
        p.dissipation_idler = d;
    }
    if let Some(v) = s.get("group_velocity")? {
        p.group_velocity = v;
    }
    if let Some(v) = s.get("gamma_nl")? {
        p.gamma_nl = v;
    }
    if let Some(v) = s.get("round_trip_length")? {
        p.round_trip_length = v;
    }
    p.validate()?;
    Ok(p)
}

/// Pump drive from `[drive]`: either `gain` or `intracavity_photons`.
pub fn pump_drive(config: &Config, params: &RingParams) -> Result<PumpDrive, CliError> {
    let s = config.section("drive");
    let mode = match s.get_or("detuning", "locked_shifted".to_string())?.as_str() {
        "locked_shifted" => DetuningMode::LockedShifted,
        "locked_zero" => DetuningMode::LockedZero,
        "explicit" => DetuningMode::Explicit(
            s.angular_hz("detuning_hz")?
                .ok_or_else(|| CliError::Config("detuning = explicit needs [drive] detuning_hz".into()))?,
        ),
        other => return Err(CliError::Config(format!("unknown detuning mode `{other}`"))),
    };
    let coupling = match s.angular_hz("coupling_hz")? {
        Some(c) => c,
        None => lambda_coeff(params)?,
    };
    match (s.get::<f64>("gain")?, s.get::<f64>("intracavity_photons")?) {
        (Some(g), None) => Ok(PumpDrive::for_gain(g, coupling, params, mode)?),
        (None, Some(n)) => Ok(PumpDrive::new(n, coupling, mode)?),
        _ => Err(CliError::Config("set exactly one of [drive] gain, intracavity_photons".into())),
    }
}

pub fn run(config: &Config, ctx: &mut Context) -> Result<String, CliError> {
    let params = ring_params(config)?;
    let drive = pump_drive(config, &params)?;
    let grid_cfg = config.section("grid");
    let start = grid_cfg.angular_hz("start_hz")?.unwrap_or(2.0 * std::f64::consts::PI * 20e6);
    let stop = grid_cfg.angular_hz("stop_hz")?.unwrap_or(2.0 * std::f64::consts::PI * 1e9);
    let points: usize = grid_cfg.get_or("points", 50)?;
    let grid = match grid_cfg.get_or("spacing", "log".to_string())?.as_str() {
        "log" => log_spaced(start, stop, points)?,
        "linear" => match points {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
        },
        other => return Err(CliError::Config(format!("unknown grid spacing `{other}`"))),
    };
    if grid.is_empty() {
        return Err(CliError::Config("[grid] points must be >= 1".into()));
    }
    let noise_db: f64 = config.section("noise").get_or("noise_db", 0.0)?;
    config.finish()?;

    let g = ring_model::gain(&params, &drive)?;
    let spectrum = squeezing_spectrum(&params, &drive, &grid)?;

    let mut w = ctx.out.create("spectrum.csv")?;
    writeln!(
        w,
        "# gain={g} dissipation_rad_per_s={} eta_signal={} eta_idler={}",
        params.mean_dissipation(),
        params.total_efficiency_signal(),
        params.total_efficiency_idler()
    )?;
    writeln!(w, "omega_rad_per_s,v_plus_db,v_minus_db")?;
    for p in &spectrum {
        writeln!(w, "{},{},{}", p.omega, p.v_plus_db, p.v_minus_db)?;
    }
    w.flush()?;

    let samples = synthesize_samples(&spectrum, noise_db, ctx.seed)?;
    let mut w = ctx.out.create("spectrum_fit.csv")?;
    writeln!(w, "# noise_db={noise_db}")?;
    writeln!(w, "omega_rad_per_s,branch,v_db")?;
    for s in &samples {
        let branch = match s.branch {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        };
        writeln!(w, "{},{branch},{}", s.omega, s.v_db)?;
    }
    w.flush()?;

    let first = &spectrum[0];
    Ok(format!(
        "gain {g:.4}; V+ {:.3} dB, V- {:.3} dB at {:.3e} Hz; {} points",
        first.v_plus_db,
        first.v_minus_db,
        first.omega / (2.0 * std::f64::consts::PI),
        spectrum.len()
    ))
}
