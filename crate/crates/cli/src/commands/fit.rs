use std::fmt::Write as _;
use std::path::Path;

use sqz_core::estimation::{
    fit_nrf_slope, fit_power_scaling, fit_spectrum, fit_variance_vs_power, Branch, PowerVariancePoint, SpectrumModel,
    SpectrumSample,
};
use sqz_core::{FitConfig, FitResult};

use super::Context;
use crate::config::Config;
use crate::error::CliError;

/// Named numeric columns of a CSV file; `#` lines are comments.
struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    source: String,
}

impl Table {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?;
        let headers = reader
            .headers()
            .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_string)
            .collect();
        let rows = reader
            .records()
            .map(|r| {
                r.map(|rec| rec.iter().map(str::to_string).collect())
                    .map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
            })
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        if rows.is_empty() {
            return Err(CliError::Format(format!("{}: no data rows", path.display())));
        }
        Ok(Self {
            headers,
            rows,
            source: path.display().to_string(),
        })
    }

    fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }

    fn index(&self, name: &str) -> Result<usize, CliError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Format(format!(
                "{}: missing column `{name}` (found: {})",
                self.source,
                self.headers.join(", ")
            ))
        })
    }

    fn text(&self, name: &str) -> Result<Vec<&str>, CliError> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>, CliError> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                r[i].parse::<f64>().map_err(|_| {
                    CliError::Format(format!("{}: row {}: `{}` in column `{name}` is not a number", self.source, k + 1, r[i]))
                })
            })
            .collect()
    }
}

fn spectrum_samples(t: &Table) -> Result<Vec<SpectrumSample>, CliError> {
    let omega = t.numbers("omega_rad_per_s")?;
    if t.has("branch") {
        let v = t.numbers("v_db")?;
        t.text("branch")?
            .iter()
            .zip(omega.iter().zip(&v))
            .map(|(b, (&omega, &v_db))| {
                let branch = match *b {
                    "plus" => Branch::Plus,
                    "minus" => Branch::Minus,
                    other => return Err(CliError::Format(format!("{}: unknown branch `{other}`", t.source))),
                };
                Ok(SpectrumSample { omega, v_db, branch })
            })
            .collect()
    } else {
        let plus = t.numbers("v_plus_db")?;
        let minus = t.numbers("v_minus_db")?;
        Ok(omega
            .iter()
            .zip(plus.iter().zip(&minus))
            .flat_map(|(&omega, (&p, &m))| {
                [
                    SpectrumSample {
                        omega,
                        v_db: p,
                        branch: Branch::Plus,
                    },
                    SpectrumSample {
                        omega,
                        v_db: m,
                        branch: Branch::Minus,
                    },
                ]
            })
            .collect())
    }
}

fn pairs(t: &Table, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    Ok(t.numbers(x)?.into_iter().zip(t.numbers(y)?).collect())
}

fn describe(report: &mut String, r: &FitResult) {
    for ((name, v), e) in r.names.iter().zip(&r.values).zip(&r.std_errors) {
        writeln!(report, "{name} = {v} +- {e}").unwrap();
    }
    writeln!(report, "residual_norm = {}", r.residual_norm).unwrap();
    writeln!(report, "iterations = {}", r.iterations).unwrap();
    writeln!(report, "converged = {}", r.converged).unwrap();
    for n in &r.notes {
        writeln!(report, "note = {n}").unwrap();
    }
}

pub fn run(config: &Config, ctx: &mut Context) -> Result<String, CliError> {
    let s = config.section("fit");
    let kind: String = s.require("kind")?;
    let data: String = s.require("data")?;
    let model = match kind.as_str() {
        "spectrum" => Some(match s.get_or("model", "locked_shifted".to_string())?.as_str() {
            "locked_shifted" => SpectrumModel::LockedShifted,
            "locked_zero" => SpectrumModel::LockedZero,
            "free_detuning" => SpectrumModel::FreeDetuning,
            other => return Err(CliError::Config(format!("unknown spectrum model `{other}`"))),
        }),
        "nrf" | "power" | "variance_power" => None,
        other => return Err(CliError::Config(format!("unknown fit kind `{other}`"))),
    };
    let fit_config = FitConfig {
        max_iterations: s.get_or("max_iterations", FitConfig::default().max_iterations)?,
        ..FitConfig::default()
    };
    config.finish()?;
    let table = Table::read(&ctx.resolve(&data))?;

    let mut report = format!("kind = {kind}\npoints = {}\n", table.rows.len());
    let summary = match kind.as_str() {
        "spectrum" => {
            let r = fit_spectrum(&spectrum_samples(&table)?, model.expect("spectrum model"), &fit_config)?;
            describe(&mut report, &r);
            if let Some(d) = r.value("dissipation") {
                writeln!(report, "dissipation_hz = {}", d / (2.0 * std::f64::consts::PI)).unwrap();
            }
            format!(
                "g = {:.4} +- {:.4}, eta = {:.4} +- {:.4}",
                r.value("gain").unwrap_or(f64::NAN),
                r.std_error("gain").unwrap_or(f64::NAN),
                r.value("eta").unwrap_or(f64::NAN),
                r.std_error("eta").unwrap_or(f64::NAN)
            )
        }
        "nrf" => {
            let r = fit_nrf_slope(&pairs(&table, "n_tot", "vardiff")?)?;
            writeln!(report, "eta = {} +- {}", r.eta, r.eta_std_error).unwrap();
            writeln!(report, "slope = {} +- {}", r.line.slope, r.line.slope_std_error).unwrap();
            writeln!(report, "intercept = {} +- {}", r.line.intercept, r.line.intercept_std_error).unwrap();
            format!("eta = {:.4} +- {:.4}", r.eta, r.eta_std_error)
        }
        "power" => {
            let r = fit_power_scaling(&pairs(&table, "power", "n_tot")?)?;
            writeln!(report, "log_log_slope = {} +- {}", r.slope, r.slope_std_error).unwrap();
            writeln!(report, "log_intercept = {} +- {}", r.intercept, r.intercept_std_error).unwrap();
            format!("log-log slope = {:.4} +- {:.4}", r.slope, r.slope_std_error)
        }
        _ => {
            let power = table.numbers("power")?;
            let plus = table.numbers("v_plus_db")?;
            let minus = table.numbers("v_minus_db")?;
            let points: Vec<PowerVariancePoint> = power
                .iter()
                .zip(plus.iter().zip(&minus))
                .map(|(&power, (&v_plus_db, &v_minus_db))| PowerVariancePoint {
                    power,
                    v_plus_db,
                    v_minus_db,
                })
                .collect();
            let r = fit_variance_vs_power(&points, &fit_config)?;
            describe(&mut report, &r);
            format!("eta = {:.4}, k = {:.4e}", r.value("eta").unwrap_or(f64::NAN), r.value("k").unwrap_or(f64::NAN))
        }
    };
    ctx.out.write_text("fit.txt", &report)?;
    Ok(summary)
}
