//! `sqz`: squeezed-light simulation, count statistics, TES trace
//! classification and model fits from a single config file.
//!
//! Configs give frequencies in Hz; outputs report angular frequencies in rad/s.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Context;
use config::Config;
use error::CliError;
use output::Output;

#[derive(Parser)]
#[command(name = "sqz", version, about = "Microring squeezed-light simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (sectioned key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `[run] out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Quadrature squeezing spectrum and a fit-ready sample file.
    Spectrum,
    /// Monte Carlo photon counts with NRF and g² estimators.
    Counts,
    /// Classify TES traces into photon numbers (synthetic round trip without input files).
    Traces,
    /// Fit spectra, NRF sweeps or power scans.
    Fit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Counts => "counts",
            Command::Traces => "traces",
            Command::Fit => "fit",
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = Config::load(path)?;
    let run_section = config.section("run");
    let config_seed: Option<u64> = run_section.get("seed")?;
    let config_out: Option<PathBuf> = run_section.get::<String>("out")?.map(PathBuf::from);
    let seed = cli.seed.or(config_seed).unwrap_or(0);
    let base_dir = path.parent().map(PathBuf::from).unwrap_or_default();
    let out_dir = cli
        .out
        .clone()
        .or_else(|| config_out.map(|o| base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("."));

    let mut ctx = Context {
        seed,
        out: Output::new(&out_dir, cli.command.name(), config.hash(), seed)?,
        base_dir,
    };
    let result = match cli.command {
        Command::Spectrum => commands::spectrum::run(&config, &mut ctx),
        Command::Counts => commands::counts::run(&config, &mut ctx),
        Command::Traces => commands::traces::run(&config, &mut ctx),
        Command::Fit => commands::fit::run(&config, &mut ctx),
    };
    let outcome = match &result {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("exit{}", e.exit_code()),
    };
    ctx.out.log_run(&outcome)?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sqz {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
