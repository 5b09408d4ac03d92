//! CLI errors and their exit codes.

use dichotomy::corpus::CorpusError;
use dichotomy::dichotomy_fit::FitError;
use dichotomy::growth::GrowthError;
use dichotomy::kinematics::KinematicsError;
use dichotomy::ratio_maps::RatioError;
use dichotomy::spectrum::SpectrumError;
use dichotomy::system::SystemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file, or input files.
    #[error("config error: {0}")]
    Config(String),
    /// The computation failed or certified infeasibility.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<GrowthError> for CliError {
    fn from(e: GrowthError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn config_or_numeric(config: bool, msg: String) -> CliError {
    if config {
        CliError::Config(msg)
    } else {
        CliError::Numeric(msg)
    }
}

fn system_is_config(e: &SystemError) -> bool {
    matches!(
        e,
        SystemError::Csv(_)
            | SystemError::CsvRead { .. }
            | SystemError::OutOfDomain { .. }
            | SystemError::IndexOutOfRange { .. }
            | SystemError::DimensionMismatch { .. }
            | SystemError::Growth(_)
    )
}

fn fit_is_config(e: &FitError) -> bool {
    match e {
        FitError::System(s) => system_is_config(s),
        FitError::Growth(_)
        | FitError::Settings(_)
        | FitError::MissingParameter(_)
        | FitError::ProjectorDimension { .. }
        | FitError::WindowMissesOrigin(_) => true,
        _ => false,
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        config_or_numeric(system_is_config(&e), e.to_string())
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        config_or_numeric(fit_is_config(&e), e.to_string())
    }
}

impl From<SpectrumError> for CliError {
    fn from(e: SpectrumError) -> Self {
        let config = match &e {
            SpectrumError::Fit(f) => fit_is_config(f),
            SpectrumError::Settings(_) => true,
            _ => false,
        };
        config_or_numeric(config, e.to_string())
    }
}

impl From<RatioError> for CliError {
    fn from(e: RatioError) -> Self {
        let config = match &e {
            RatioError::Fit(f) => fit_is_config(f),
            RatioError::System(s) => system_is_config(s),
            RatioError::Settings(_) | RatioError::Csv(_) => true,
            _ => false,
        };
        config_or_numeric(config, e.to_string())
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        let config = match &e {
            KinematicsError::DimensionMismatch { .. } => true,
            KinematicsError::System(s) => system_is_config(s),
            KinematicsError::Fit(f) => fit_is_config(f),
            KinematicsError::Spectrum(SpectrumError::Settings(_)) => true,
            _ => false,
        };
        config_or_numeric(config, e.to_string())
    }
}
