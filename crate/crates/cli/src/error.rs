use thiserror::Error;
use zeromode::classifier::{ClassifyError, ModelError};
use zeromode::data::DataError;
use zeromode::threshold::ThresholdError;
use zeromode::training::TrainingError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ThresholdError> for CliError {
    fn from(e: ThresholdError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::Encoding(e) => CliError::Data(e.to_string()),
            ClassifyError::Threshold(e) => e.into(),
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::InvalidConfig(m) => CliError::Usage(m),
            TrainingError::EmptySet => CliError::Data(e.to_string()),
            TrainingError::Encoding(e) => CliError::Data(e.to_string()),
            TrainingError::Model(e) => e.into(),
            TrainingError::Threshold(e) => e.into(),
            TrainingError::Classify(e) => e.into(),
        }
    }
}
