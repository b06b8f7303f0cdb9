use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("invalid bracket: lower end {lo}, upper end {hi} (need decay below, blow-up above)")]
    Bracket { lo: String, hi: String },
    #[error("construction failed: {0}")]
    Construct(String),
    #[error("{failed} of {total} properties failed")]
    SuiteFailed { failed: usize, total: usize },
    #[error(transparent)]
    Core(#[from] kwell::error::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Bracket { .. } => 3,
            CliError::Construct(_) => 4,
            CliError::SuiteFailed { .. } => 5,
            CliError::Core(_) | CliError::Io(_) | CliError::Json(_) => 1,
        }
    }
}
