//! Error classification for exit codes: 2 config, 3 data, 4 numerical.

use sae_core::data::DataError;
use sae_core::diagnostics::DiagnosticsError;
use sae_core::estimators::EstimatorError;
use sae_core::glm::GlmError;
use sae_core::oracle::mc::McError;
use sae_core::oracle::OracleError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GlmError> for CliError {
    fn from(e: GlmError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Data(inner) => CliError::Data(inner.to_string()),
            // mismatches between the input files are data problems
            e @ (EstimatorError::UnknownArea(_) | EstimatorError::UnrepresentedCell { .. }) => {
                CliError::Data(e.to_string())
            }
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<DiagnosticsError> for CliError {
    fn from(e: DiagnosticsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Data(inner) => CliError::Data(inner.to_string()),
            OracleError::BadSpec(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Oracle(inner) => inner.into(),
            McError::Estimator(inner) => inner.into(),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io: {e}"))
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
