use alet::AletError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{0}")]
    Anomaly(String),

    #[error("{0}")]
    Engine(AletError),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl From<AletError> for CliError {
    fn from(e: AletError) -> Self {
        match e {
            AletError::CertificateAnomaly { .. } => CliError::Anomaly(e.to_string()),
            AletError::InvalidArgument(m) | AletError::InvalidConfiguration(m) => {
                CliError::Validation(vec![m])
            }
            other => CliError::Engine(other),
        }
    }
}

impl CliError {
    /// Exit status: 2 for validation errors, 3 for certificate anomalies.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Anomaly(_) => 3,
            CliError::Engine(_) | CliError::Io(_) => 1,
        }
    }
}
