use std::fmt::Write as _;
use std::io::Write;

use sqz_core::photon_stats::{count_statistics, effective_mode_number, sample_counts, StatsOptions};
use sqz_core::{Arm, CountSet, SchmidtSpectrum};

use super::Context;
use crate::config::Config;
use crate::error::CliError;

/// Schmidt spectrum from `[schmidt]`: either explicit `squeezing` values or
/// `modes` equal modes sharing `mean_pairs`.
pub fn schmidt_spectrum(config: &Config) -> Result<SchmidtSpectrum, CliError> {
    let s = config.section("schmidt");
    let eta: Option<f64> = s.get("eta")?;
    let (Some(eta_s), Some(eta_i)) = (s.get("eta_signal")?.or(eta), s.get("eta_idler")?.or(eta)) else {
        return Err(CliError::Config("set [schmidt] eta (or eta_signal and eta_idler)".into()));
    };
    let spec = match (s.list::<f64>("squeezing")?, s.get::<f64>("mean_pairs")?) {
        (Some(r), None) => SchmidtSpectrum::new(r, eta_s, eta_i)?,
        (None, Some(mean)) => SchmidtSpectrum::equal_modes(s.get_or("modes", 1usize)?, mean, eta_s, eta_i)?,
        _ => return Err(CliError::Config("set exactly one of [schmidt] squeezing, mean_pairs".into())),
    };
    Ok(spec.with_noise(s.get_or("noise_signal", 0.0)?, s.get_or("noise_idler", 0.0)?)?)
}

fn write_counts(ctx: &mut Context, counts: &CountSet) -> Result<(), CliError> {
    let mut w = ctx.out.create("counts.csv")?;
    writeln!(w, "pulse_index,n_signal,n_idler,saturated")?;
    for (i, (p, s)) in counts.pulses.iter().zip(&counts.saturated).enumerate() {
        writeln!(w, "{i},{},{},{}", p.signal, p.idler, u8::from(*s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(config: &Config, ctx: &mut Context) -> Result<String, CliError> {
    let spec = schmidt_spectrum(config)?;
    let sampling = config.section("sampling");
    let pulses: usize = sampling.require("pulses")?;
    let options = StatsOptions {
        subsets: sampling.get_or("subsets", 8)?,
        include_saturated: sampling.get_or("include_saturated", false)?,
    };
    let sweep: Option<Vec<f64>> = config.section("sweep").list("mean_pairs")?;
    let sweep_modes: usize = config.section("sweep").get_or("modes", spec.squeezing.len())?;
    config.finish()?;

    let counts = sample_counts(&spec, pulses, ctx.seed)?;
    write_counts(ctx, &counts)?;
    let stats = count_statistics(&counts, &options).map_err(|e| match e {
        sqz_core::StatsError::ZeroTotal => CliError::Degenerate(
            "NRF undefined: total mean photon number is zero (no pairs were generated)".into(),
        ),
        other => other.into(),
    })?;

    let mut report = String::new();
    let pm = |m: f64, s: f64| format!("{m} +- {s}");
    writeln!(report, "pulses = {}", counts.len()).unwrap();
    writeln!(report, "pulses_used = {}", stats.pulses_used).unwrap();
    writeln!(report, "pulses_flagged_saturated = {}", stats.pulses_flagged).unwrap();
    writeln!(report, "subsets = {}", options.subsets).unwrap();
    writeln!(report, "n_tot = {}", pm(stats.n_tot.mean, stats.n_tot.std)).unwrap();
    writeln!(report, "vardiff = {}", pm(stats.vardiff.mean, stats.vardiff.std)).unwrap();
    writeln!(report, "nrf = {}", pm(stats.nrf.mean, stats.nrf.std)).unwrap();
    writeln!(report, "nrf_db = {}", stats.nrf_db()).unwrap();
    writeln!(report, "g2_signal = {}", pm(stats.g2_signal.mean, stats.g2_signal.std)).unwrap();
    writeln!(report, "g2_idler = {}", pm(stats.g2_idler.mean, stats.g2_idler.std)).unwrap();
    match effective_mode_number(stats.g2_signal.mean) {
        Ok(k) => writeln!(report, "effective_modes_signal = {k}").unwrap(),
        Err(_) => writeln!(report, "effective_modes_signal = undefined (g2 <= 1)").unwrap(),
    }
    writeln!(report, "expected_nrf = {}", spec.expected_nrf().map_or(f64::NAN, |v| v)).unwrap();
    writeln!(report, "expected_g2_signal = {}", spec.expected_g2(Arm::Signal).map_or(f64::NAN, |v| v)).unwrap();
    ctx.out.write_text("stats.txt", &report)?;

    if let Some(means) = sweep {
        let mut w = ctx.out.create("nrf_points.csv")?;
        writeln!(w, "mean_pairs,n_tot,vardiff,nrf,nrf_std")?;
        for (k, &mean) in means.iter().enumerate() {
            let point = SchmidtSpectrum::equal_modes(sweep_modes, mean, spec.eta_signal, spec.eta_idler)?
                .with_noise(spec.noise_signal, spec.noise_idler)?;
            let seed = ctx.seed.wrapping_add(k as u64 + 1);
            let c = sample_counts(&point, pulses, seed)?;
            let st = count_statistics(&c, &options)?;
            writeln!(
                w,
                "{mean},{},{},{},{}",
                st.n_tot_all, st.vardiff_all, st.nrf.mean, st.nrf.std
            )?;
        }
        w.flush()?;
    }

    Ok(format!(
        "NRF {:.4} +- {:.4} ({:.2} dB); g2_S {:.3}",
        stats.nrf.mean,
        stats.nrf.std,
        stats.nrf_db(),
        stats.g2_signal.mean
    ))
}
