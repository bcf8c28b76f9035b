use sqz_core::{FitError, RingError, StatsError, TesError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Degenerate(_) => 4,
        }
    }
}

impl From<RingError> for CliError {
    fn from(e: RingError) -> Self {
        match e {
            RingError::Domain { .. } => CliError::Config(e.to_string()),
            RingError::Singular { .. } | RingError::AboveThreshold { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        match e {
            StatsError::Domain { .. } | StatsError::TooFewSubsets(_) => CliError::Config(e.to_string()),
            StatsError::TooFewPulses { .. } | StatsError::ZeroMean(_) | StatsError::ZeroTotal => {
                CliError::Degenerate(e.to_string())
            }
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::TooFewPoints { .. } | FitError::InvalidData(_) | FitError::TooFewSubsets(_) => {
                CliError::Format(e.to_string())
            }
            FitError::InvalidStart | FitError::NoConvergence { .. } => CliError::Numerical(e.to_string()),
            FitError::Conditioning { .. } => CliError::Degenerate(e.to_string()),
        }
    }
}

impl From<TesError> for CliError {
    fn from(e: TesError) -> Self {
        match e {
            TesError::Domain(_) => CliError::Config(e.to_string()),
            TesError::Format { .. } | TesError::Empty | TesError::Io(_) => CliError::Format(e.to_string()),
            TesError::Degenerate(_) => CliError::Degenerate(e.to_string()),
            TesError::Fit(_) => CliError::Numerical(e.to_string()),
        }
    }
}
