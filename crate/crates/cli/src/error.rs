use std::path::Path;

use lift_core::dataset::DatasetError;
use lift_core::evaluator::EvalError;
use lift_core::litpipe::LitError;
use lift_core::llmclient::LlmError;
use lift_core::stats::StatsError;
use lift_core::textualize::TextError;

/// Each variant maps to its own process exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Transport(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::InvalidRequest(_) | LlmError::MockScript(_) => CliError::Validation(e.to_string()),
            _ => CliError::Transport(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match &e {
            DatasetError::Io(_) => CliError::Io(e.to_string()),
            DatasetError::Csv(c) if c.is_io_error() => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<LitError> for CliError {
    fn from(e: LitError) -> Self {
        match e {
            LitError::Io { .. } => CliError::Io(e.to_string()),
            LitError::Llm(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TextError> for CliError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Text(inner) => inner.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::Validation(e.to_string())
    }
}
