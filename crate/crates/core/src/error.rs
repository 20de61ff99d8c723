use thiserror::Error;

/// Errors raised by the optimizer and its oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AletError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// The confidence certificates of a run contradict each other. On correct
    /// inputs this only happens off the good event; a reproducible anomaly
    /// means the Lipschitz bound is too small or the noise range is wrong.
    #[error("certificate anomaly in round {round}: {detail}")]
    CertificateAnomaly { round: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, AletError>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> AletError {
    AletError::InvalidArgument(msg.into())
}

pub(crate) fn invalid_config(msg: impl Into<String>) -> AletError {
    AletError::InvalidConfiguration(msg.into())
}
