use rgpt_core::CoreError;
use rgpt_symbolic::SymError;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("missing input {0}")]
    MissingInput(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("symbolic: {0}")]
    Symbolic(#[from] SymError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 verification failure, 2 configuration or input error, 3 numerical
    /// or output error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::MissingInput(_) => 2,
            CliError::Core(CoreError::InvalidSpec(_))
            | CliError::Core(CoreError::InvalidWindow(_))
            | CliError::Core(CoreError::UnknownWindow(_))
            | CliError::Core(CoreError::MemoryBudget { .. }) => 2,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::MissingInput(_) => "missing_input",
            CliError::Core(_) => "numerical",
            CliError::Symbolic(_) => "symbolic",
            CliError::Io(_) => "io",
            CliError::Csv(_) => "csv",
            CliError::Json(_) => "json",
            CliError::Verification(_) => "verification",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self, config_hash: Option<&str>) -> Value {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
                "config_hash": config_hash,
            }
        })
    }
}
