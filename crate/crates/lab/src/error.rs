use std::path::PathBuf;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: &'static str, source: bosegas_core::Error },

    #[error("stage `{stage}` needs the output of `{required}`; run `bosegas {required}` first")]
    MissingStage { stage: &'static str, required: &'static str },

    #[error("stage `{stage}` reproduced {file} with a different checksum; its inputs changed since it was stored")]
    StaleArtifact { stage: &'static str, file: String },

    #[error("no certificate: {reason}")]
    NoCertificate { reason: String },
}

impl LabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    pub fn stage(stage: &'static str) -> impl FnOnce(bosegas_core::Error) -> Self {
        move |source| LabError::Stage { stage, source }
    }

    /// 2 for bad input, 3 for numerical failures, 4 when no certificate exists.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Config(_) | LabError::Parse { .. } | LabError::MissingStage { .. } => 2,
            LabError::Stage { source, .. } if is_validation(source) => 2,
            LabError::NoCertificate { .. } => 4,
            _ => 3,
        }
    }
}

fn is_validation(e: &bosegas_core::Error) -> bool {
    use bosegas_core::Error::*;
    matches!(
        e,
        InvalidParameter(_)
            | NegativeCoefficient { .. }
            | OddSpectrum { .. }
            | WrongPotentialClass { .. }
            | CutoffTooLarge { .. }
            | BudgetExceeded { .. }
            | DimensionGuard { .. }
    )
}
