use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};

use sqz_core::photon_stats::{count_statistics, sample_counts, StatsOptions};
use sqz_core::tes::{analyze_traces, generate_traces, io, TraceAnalysis};
use sqz_core::{Arm, FitConfig, PulseTemplate, TraceSet};

use super::counts::schmidt_spectrum;
use super::Context;
use crate::config::Config;
use crate::error::CliError;

fn template(config: &Config) -> Result<(PulseTemplate, f64), CliError> {
    let s = config.section("template");
    let samples: usize = s.get_or("samples", 64)?;
    let dt: f64 = s.get_or("sample_period_s", 1e-8)?;
    let rise: f64 = s.get_or("rise_time_s", 5e-8)?;
    let fall: f64 = s.get_or("fall_time_s", 2e-7)?;
    let noise: f64 = s.get_or("noise_sigma", 1e-4)?;
    let nonlinearity: f64 = s.get_or("nonlinearity", 1.0)?;
    let shape = PulseTemplate::tes_shape(samples, dt, rise, fall);
    let t = match (s.get::<f64>("separation_sigma")?, s.get::<f64>("per_photon_gain")?) {
        (Some(sep), None) => {
            let linear = PulseTemplate::with_separation(shape, sep, noise)?;
            PulseTemplate::new(linear.shape, linear.per_photon_gain, noise, nonlinearity)?
        }
        (None, Some(gain)) => PulseTemplate::new(shape, gain, noise, nonlinearity)?,
        _ => return Err(CliError::Config("set exactly one of [template] separation_sigma, per_photon_gain".into())),
    };
    Ok((t, dt))
}

fn describe(report: &mut String, arm: &str, a: &TraceAnalysis) {
    let m = &a.mixture;
    writeln!(report, "[{arm}]").unwrap();
    writeln!(report, "pulses = {}", a.scores.len()).unwrap();
    writeln!(report, "pca_explained_variance = {}", a.pca.explained).unwrap();
    writeln!(report, "histogram_bins = {}", a.histogram.bins()).unwrap();
    writeln!(report, "components = {}", m.components.len()).unwrap();
    for (k, c) in m.components.iter().enumerate() {
        writeln!(
            report,
            "component_{k} = amplitude {} mean {:e} sigma {:e}",
            c.amplitude, c.mean, c.sigma
        )
        .unwrap();
    }
    let bounds: Vec<String> = m.boundaries.iter().map(|b| format!("{b:e}")).collect();
    writeln!(report, "boundaries = {}", bounds.join(",")).unwrap();
    if let Some(r) = m.resolution() {
        writeln!(report, "min_class_separation_sigma = {r}").unwrap();
    }
    writeln!(report, "tail_count = {}", a.assignment.tail_count).unwrap();
    writeln!(report, "tail_fraction = {}", a.assignment.tail_fraction()).unwrap();
    writeln!(report, "mixture_residual_norm = {}", m.residual_norm).unwrap();
    for n in &m.notes {
        writeln!(report, "note = {n}").unwrap();
    }
}

fn write_assigned(ctx: &mut Context, signal: &[u32], idler: Option<&[u32]>) -> Result<(), CliError> {
    let mut w = ctx.out.create("assigned_counts.csv")?;
    match idler {
        Some(idler) => {
            writeln!(w, "pulse_index,n_signal,n_idler")?;
            for (i, (s, d)) in signal.iter().zip(idler).enumerate() {
                writeln!(w, "{i},{s},{d}")?;
            }
        }
        None => {
            writeln!(w, "pulse_index,n_signal")?;
            for (i, s) in signal.iter().enumerate() {
                writeln!(w, "{i},{s}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn save_traces(ctx: &Context, name: &str, traces: &TraceSet, format: &str) -> Result<(), CliError> {
    if matches!(format, "binary" | "both") {
        io::write_binary(BufWriter::new(File::create(ctx.out.path(&format!("{name}.tes")))?), traces)?;
    }
    if matches!(format, "csv" | "both") {
        io::write_csv(BufWriter::new(File::create(ctx.out.path(&format!("{name}.csv")))?), traces)?;
    }
    Ok(())
}

pub fn run(config: &Config, ctx: &mut Context) -> Result<String, CliError> {
    let s = config.section("traces");
    let signal_path: Option<String> = s.get("signal")?;
    let idler_path: Option<String> = s.get("idler")?;
    let max_components: usize = s.get_or("max_components", 16)?;
    let fit = FitConfig::default();

    let Some(signal_path) = signal_path else {
        return synthetic(config, ctx, max_components, &fit);
    };
    let default_period: Option<f64> = s.get("sample_period_s")?;
    config.finish()?;

    let load = |p: &str| io::read_path(&ctx.resolve(p), default_period).map_err(CliError::from);
    let signal = analyze_traces(&load(&signal_path)?, max_components, &fit)?;
    let idler = match &idler_path {
        Some(p) => Some(analyze_traces(&load(p)?, max_components, &fit)?),
        None => None,
    };
    if let Some(i) = &idler {
        if i.scores.len() != signal.scores.len() {
            return Err(CliError::Format(format!(
                "signal has {} traces, idler has {}",
                signal.scores.len(),
                i.scores.len()
            )));
        }
    }
    write_assigned(
        ctx,
        &signal.assignment.numbers,
        idler.as_ref().map(|i| i.assignment.numbers.as_slice()),
    )?;
    let mut report = String::new();
    describe(&mut report, "signal", &signal);
    if let Some(i) = &idler {
        describe(&mut report, "idler", i);
    }
    ctx.out.write_text("diagnostics.txt", &report)?;
    Ok(format!(
        "{} traces; {} signal classes; tail fraction {:.2e}",
        signal.scores.len(),
        signal.mixture.components.len(),
        signal.assignment.tail_fraction()
    ))
}

/// No input files: sample counts, synthesize traces, classify, and compare.
fn synthetic(config: &Config, ctx: &mut Context, max_components: usize, fit: &FitConfig) -> Result<String, CliError> {
    let spec = schmidt_spectrum(config)?;
    let pulses: usize = config.section("sampling").require("pulses")?;
    let subsets: usize = config.section("sampling").get_or("subsets", 8)?;
    let (template, dt) = template(config)?;
    let write_format: String = config.section("traces").get_or("write_traces", "none".to_string())?;
    if !matches!(write_format.as_str(), "none" | "binary" | "csv" | "both") {
        return Err(CliError::Config(format!("unknown write_traces `{write_format}`")));
    }
    config.finish()?;

    let truth = sample_counts(&spec, pulses, ctx.seed)?;
    let mut report = String::new();
    let mut assigned = Vec::new();
    let mut worst: f64 = 0.0;
    for (arm, name, offset) in [(Arm::Signal, "signal", 0u64), (Arm::Idler, "idler", 1)] {
        let column = truth.column(arm);
        let traces = generate_traces(&column, &template, dt, ctx.seed.wrapping_add(offset.wrapping_mul(0x9E37_79B9)))?;
        save_traces(ctx, &format!("traces_{name}"), &traces, &write_format)?;
        let a = analyze_traces(&traces, max_components, fit)?;
        let wrong = a.assignment.numbers.iter().zip(&column).filter(|(x, y)| x != y).count();
        let rate = wrong as f64 / column.len() as f64;
        worst = worst.max(rate);
        describe(&mut report, name, &a);
        writeln!(report, "misclassification_rate = {rate}").unwrap();
        assigned.push(a.assignment.numbers);
    }
    write_assigned(ctx, &assigned[0], Some(&assigned[1]))?;

    let recovered = sqz_core::CountSet::from_pulses(
        assigned[0]
            .iter()
            .zip(&assigned[1])
            .map(|(&s, &i)| sqz_core::PulseCount::new(s, i))
            .collect(),
        ctx.seed,
    );
    let options = StatsOptions {
        subsets,
        ..StatsOptions::default()
    };
    writeln!(report, "[estimators]").unwrap();
    writeln!(report, "class_separation_sigma = {}", template.class_separation()).unwrap();
    match (count_statistics(&truth, &options), count_statistics(&recovered, &options)) {
        (Ok(t), Ok(r)) => {
            writeln!(report, "nrf_true_counts = {}", t.nrf.mean).unwrap();
            writeln!(report, "nrf_assigned_counts = {}", r.nrf.mean).unwrap();
            writeln!(report, "g2_signal_true_counts = {}", t.g2_signal.mean).unwrap();
            writeln!(report, "g2_signal_assigned_counts = {}", r.g2_signal.mean).unwrap();
        }
        (Err(e), _) | (_, Err(e)) => writeln!(report, "estimators_unavailable = {e}").unwrap(),
    }
    ctx.out.write_text("diagnostics.txt", &report)?;
    Ok(format!("synthetic round trip: worst-arm misclassification {worst:.3e}"))
}
