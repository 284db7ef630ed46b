use std::path::PathBuf;
use thiserror::Error;

/// Scene configuration problems, reported with the offending key path.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read scene file {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scene file parse error: {0}")]
    Parse(String),
    #[error("invalid scene config at `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

/// Runtime simulation failures.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("particle {index} left the safe grid band at step {step}")]
    ParticleOutOfDomain { index: usize, step: usize },
    #[error("deformation gradient inverted (det(F) <= 0) on particle {index} at step {step}")]
    Inverted { index: usize, step: usize },
    #[error("velocity blow-up at step {step}: |v| = {vmax:.3e} exceeds cap {cap:.3e}")]
    BlowUp { step: usize, vmax: f64, cap: f64 },
    #[error("checkpoint {segment} missing from store")]
    MissingCheckpoint { segment: usize },
    #[error("checkpoint replay mismatch in segment {segment}: state digest differs")]
    ReplayMismatch { segment: usize },
    #[error("non-finite adjoint encountered at step {step}")]
    NonFiniteAdjoint { step: usize },
    #[error("non-finite gradient in group `{group}`")]
    NonFiniteGradient { group: String },
    #[error("trajectory missing sample at step {step}")]
    MissingSample { step: usize },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum MarrowError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}
